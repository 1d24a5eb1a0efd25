"""LBMGEO v1 geometry files and fixture generators.

File layout: a text header line ``LBMGEO v1 <nx> <ny> <nz>`` followed
by nx·ny·nz bytes, 0 = fluid and 1 = solid, x varying fastest.
Two-dimensional domains are stored with nz = 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from progressive_lbm.errors import GeometryFormatError, OutputError

logger = logging.getLogger(__name__)

MAGIC = "LBMGEO"
VERSION = "v1"


@dataclass
class GeometryMask:
    """Per-cell solid flags of the whole bounding box.

    solid is indexed [x, y] or [x, y, z].
    """

    solid: np.ndarray

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.solid.shape)

    @property
    def solid_count(self) -> int:
        return int(np.count_nonzero(self.solid))

    @classmethod
    def empty(cls, dims: Sequence[int]) -> GeometryMask:
        return cls(np.zeros(tuple(dims), dtype=bool))

    def file_dims(self) -> tuple[int, int, int]:
        dims = self.dims
        return (dims[0], dims[1], dims[2] if len(dims) == 3 else 1)

    def for_domain(self, domain: Sequence[int]) -> GeometryMask:
        """Reshape to the dimensionality of a domain, validating the size.

        Raises:
            GeometryFormatError: If the cell counts per axis differ.
        """
        domain = tuple(int(n) for n in domain)
        if self.dims == domain:
            return self
        if len(domain) == 2 and self.dims == (domain[0], domain[1], 1):
            return GeometryMask(self.solid[:, :, 0].copy())
        raise GeometryFormatError(
            "<memory>", f"geometry dims {self.dims} do not match domain {domain}"
        )


def load_geometry(path: Path | str, expected: Optional[Sequence[int]] = None) -> GeometryMask:
    """Parse an LBMGEO v1 file.

    Args:
        path: Geometry file.
        expected: Domain dimensions to validate against.

    Returns:
        GeometryMask with 3-D shape, or 2-D when expected is 2-D.

    Raises:
        GeometryFormatError: Malformed header, truncated payload or size
            mismatch, each with its own message.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise GeometryFormatError(path, f"cannot read file: {e}") from e

    newline = raw.find(b"\n")
    if newline < 0:
        raise GeometryFormatError(path, "malformed header: missing newline after header")
    parts = raw[:newline].decode("ascii", errors="replace").split()
    if len(parts) != 5 or parts[0] != MAGIC or parts[1] != VERSION:
        raise GeometryFormatError(
            path, f"malformed header: expected '{MAGIC} {VERSION} <nx> <ny> <nz>'"
        )
    try:
        nx, ny, nz = (int(p) for p in parts[2:])
    except ValueError as e:
        raise GeometryFormatError(path, "malformed header: dimensions must be integers") from e
    if min(nx, ny, nz) <= 0:
        raise GeometryFormatError(path, "malformed header: dimensions must be positive")

    payload = raw[newline + 1 :]
    count = nx * ny * nz
    if len(payload) < count:
        raise GeometryFormatError(
            path, f"truncated payload: expected {count} bytes, found {len(payload)}"
        )
    if len(payload) > count:
        raise GeometryFormatError(
            path, f"size mismatch: header declares {count} cells, payload has {len(payload)}"
        )
    values = np.frombuffer(payload, dtype=np.uint8)
    if np.any(values > 1):
        raise GeometryFormatError(path, "payload bytes must be 0 (fluid) or 1 (solid)")

    mask = GeometryMask(values.reshape((nx, ny, nz), order="F").astype(bool))
    if expected is not None:
        try:
            mask = mask.for_domain(expected)
        except GeometryFormatError as e:
            raise GeometryFormatError(path, e.message) from e
    logger.debug(f"Loaded geometry {path} dims={mask.dims} solids={mask.solid_count}")
    return mask


def save_geometry(mask: GeometryMask, path: Path | str) -> Path:
    """Write a mask in LBMGEO v1 format."""
    path = Path(path)
    nx, ny, nz = mask.file_dims()
    solid = mask.solid.reshape((nx, ny, nz))
    header = f"{MAGIC} {VERSION} {nx} {ny} {nz}\n".encode("ascii")
    body = solid.astype(np.uint8).ravel(order="F").tobytes()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + body)
    except OSError as e:
        raise OutputError(path, str(e)) from e
    return path


# Fixture generators


def _box_slices(lo: Sequence[int], hi: Sequence[int]) -> tuple[slice, ...]:
    return tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))


def open_box(dims: Sequence[int]) -> GeometryMask:
    """All-fluid domain."""
    return GeometryMask.empty(dims)


def closed_box(dims: Sequence[int], wall: int = 1) -> GeometryMask:
    """Fluid interior enclosed by solid walls of the given thickness."""
    solid = np.ones(tuple(dims), dtype=bool)
    solid[tuple(slice(wall, n - wall) for n in dims)] = False
    return GeometryMask(solid)


def straight_channel(dims: Sequence[int], width: int, axis: int = 0) -> GeometryMask:
    """Solid block pierced by a square duct along an axis, centred on the others."""
    solid = np.ones(tuple(dims), dtype=bool)
    duct = []
    for a, n in enumerate(dims):
        if a == axis:
            duct.append(slice(0, n))
        else:
            start = (n - width) // 2
            duct.append(slice(start, start + width))
    solid[tuple(duct)] = False
    return GeometryMask(solid)


def l_channel(dims: Sequence[int], width: int, margin: int, bend: int) -> GeometryMask:
    """L-shaped duct: a leg along +x from the margin to the bend, then up along +y.

    The horizontal leg spans x in [margin, bend + width) and y in
    [margin, margin + width); the vertical leg spans x in
    [bend, bend + width) and y in [margin, ny - margin). In 3-D both legs
    span z in [margin, margin + width).
    """
    solid = np.ones(tuple(dims), dtype=bool)
    z = [slice(margin, margin + width)] if len(dims) == 3 else []
    horizontal = (slice(margin, bend + width), slice(margin, margin + width), *z)
    vertical = (slice(bend, bend + width), slice(margin, dims[1] - margin), *z)
    solid[horizontal] = False
    solid[vertical] = False
    return GeometryMask(solid)


def channel_grid(dims: Sequence[int], width: int, pitch: int) -> GeometryMask:
    """Solid block with ducts of the given width every pitch cells along each axis."""
    solid = np.ones(tuple(dims), dtype=bool)
    d = len(dims)
    for axis in range(d):
        others = [a for a in range(d) if a != axis]
        starts = [range(pitch // 2 - width // 2, dims[a] - width + 1, pitch) for a in others]
        for combo in np.array(np.meshgrid(*starts, indexing="ij")).reshape(len(others), -1).T:
            index: list[slice] = [slice(0, n) for n in dims]
            for a, start in zip(others, combo):
                index[a] = slice(int(start), int(start) + width)
            solid[tuple(index)] = False
    return GeometryMask(solid)


GENERATORS: dict[str, Callable[..., GeometryMask]] = {
    "open-box": open_box,
    "closed-box": closed_box,
    "straight-channel": straight_channel,
    "l-channel": l_channel,
    "channel-grid": channel_grid,
}


def generate(kind: str, dims: Sequence[int], **params: int) -> GeometryMask:
    """Run a named fixture generator.

    Raises:
        ValueError: If the generator name is unknown.
    """
    try:
        generator = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"Unknown geometry generator '{kind}'") from None
    mask = generator(dims, **params)
    logger.info(f"Generated {kind} geometry dims={mask.dims} solids={mask.solid_count}")
    return mask
