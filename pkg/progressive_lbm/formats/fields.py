"""Field snapshots: raw float64 grids, sidecar metadata and PGM slices.

Raw files hold the whole bounding box as little-endian float64 with x
varying fastest. Cells of tiles that do not exist are filled with the
value an untouched cell holds at that iteration: the ambient value for
fluid, and the solid convention (rho = 0, u = 0, psi = ambient psi)
for solid cells.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
import xxhash

from progressive_lbm.errors import OutputError
from progressive_lbm.lattice import speed_squared

if TYPE_CHECKING:
    from progressive_lbm.engine import SimulationState
    from progressive_lbm.mesh import Tile

logger = logging.getLogger(__name__)

FIELDS = ("rho", "u_magnitude", "psi")


@dataclass
class FieldDump:
    """Paths and metadata of one written snapshot."""

    field: str
    component: int
    iteration: int
    dims: tuple[int, ...]
    raw_path: Path
    meta_path: Path
    digest: str
    """xxh64 of the raw payload, hex."""

    fill_value: float
    vmin: float
    vmax: float
    pgm_path: Optional[Path] = None


def tile_field(tile: Tile, what: str, component: int) -> np.ndarray:
    """One field of one component over a tile's cells."""
    comp = tile.components[component]
    if what == "rho":
        return comp.rho.copy()
    if what == "u_magnitude":
        return np.sqrt(speed_squared(comp.u))
    if what == "psi":
        return tile.psi_of(component).copy()
    raise ValueError(f"Unknown field '{what}', expected one of {FIELDS}")


def ambient_values(state: SimulationState, what: str, component: int) -> tuple[float, float]:
    """(fluid fill, solid fill) for cells outside the mesh."""
    ambient = state.ambient
    if what == "rho":
        return ambient.rho(component), 0.0
    if what == "u_magnitude":
        u = ambient.u(component)
        return float(np.sqrt(speed_squared(u.reshape((-1, 1)))[0])), 0.0
    if what == "psi":
        return ambient.psi(component), ambient.psi(component)
    raise ValueError(f"Unknown field '{what}', expected one of {FIELDS}")


def dense_field(state: SimulationState, what: str, component: int = 0) -> np.ndarray:
    """Bounding-box grid of a field, with absent tiles filled as untouched cells.

    Args:
        state: Simulation state.
        what: 'rho', 'u_magnitude' or 'psi'.
        component: Component index.

    Returns:
        Array indexed [x, y(, z)].
    """
    tilemap = state.tilemap
    solid = tilemap.geometry.mask.solid
    fluid_fill, solid_fill = ambient_values(state, what, component)
    grid = np.where(solid, solid_fill, fluid_fill).astype(np.float64)
    n = tilemap.extent
    for tile in tilemap.sorted_tiles():
        index = tuple(slice(o, o + n) for o in tile.origin)
        grid[index] = tile_field(tile, what, component)
    return grid


def write_pgm(plane: np.ndarray, path: Path) -> tuple[float, float]:
    """Write a 2-D array as 8-bit binary PGM, min-max normalized.

    Rows run from the highest y down so the image is upright.

    Returns:
        The (min, max) normalization bounds.
    """
    vmin = float(plane.min())
    vmax = float(plane.max())
    span = vmax - vmin
    if span > 0:
        scaled = np.round((plane - vmin) / span * 255.0)
    else:
        scaled = np.zeros_like(plane)
    pixels = scaled.astype(np.uint8).T[::-1]
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())
    return vmin, vmax


def mid_plane(grid: np.ndarray) -> np.ndarray:
    """The z mid-plane of a 3-D grid; 2-D grids are returned as is."""
    if grid.ndim == 3:
        result: np.ndarray = grid[:, :, grid.shape[2] // 2]
        return result
    return grid


def dump_field(
    state: SimulationState,
    directory: Path | str,
    what: str,
    component: int = 0,
    prefix: str = "",
    pgm: bool = False,
) -> FieldDump:
    """Write one field snapshot with its sidecar and optional PGM slice.

    Args:
        state: Simulation state.
        directory: Output directory (created if needed).
        what: 'rho', 'u_magnitude' or 'psi'.
        component: Component index.
        prefix: File name prefix, e.g. the run mode.
        pgm: Also write a mid-plane PGM image.

    Returns:
        FieldDump describing the written files.

    Raises:
        OutputError: If any file cannot be written.
    """
    directory = Path(directory)
    grid = dense_field(state, what, component)
    stem = f"{prefix}{what}_c{component}_it{state.iteration:06d}"
    raw_path = directory / f"{stem}.raw"
    meta_path = directory / f"{stem}.txt"
    pgm_path = directory / f"{stem}.pgm" if pgm else None
    payload = grid.astype("<f8").ravel(order="F").tobytes()
    digest = xxhash.xxh64(payload).hexdigest()
    fill_value = ambient_values(state, what, component)[0]
    vmin, vmax = float(grid.min()), float(grid.max())

    try:
        directory.mkdir(parents=True, exist_ok=True)
        raw_path.write_bytes(payload)
        if pgm_path is not None:
            vmin, vmax = write_pgm(mid_plane(grid), pgm_path)
        meta = [
            f"field = {what}",
            f"component = {component}",
            f"iteration = {state.iteration}",
            f"dims = {' '.join(str(n) for n in grid.shape)}",
            "dtype = float64 little-endian",
            "order = x-fastest",
            f"fill_value = {fill_value!r}",
            f"min = {vmin!r}",
            f"max = {vmax!r}",
            f"xxh64 = {digest}",
        ]
        meta_path.write_text("\n".join(meta) + "\n")
    except OSError as e:
        raise OutputError(e.filename or directory, str(e)) from e

    logger.debug(f"Wrote {raw_path} ({len(payload)} bytes, xxh64 {digest})")
    return FieldDump(
        field=what,
        component=component,
        iteration=state.iteration,
        dims=tuple(grid.shape),
        raw_path=raw_path,
        meta_path=meta_path,
        digest=digest,
        fill_value=fill_value,
        vmin=vmin,
        vmax=vmax,
        pgm_path=pgm_path,
    )


def read_raw(path: Path | str, dims: Sequence[int]) -> np.ndarray:
    """Read a raw dump back into an [x, y(, z)] array."""
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    return data.reshape(tuple(dims), order="F")
