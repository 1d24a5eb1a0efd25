"""The progressive mesh.

A sparse map of fixed-size tiles that only grows. Tiles next to the
mesh frontier see the ambient state through their halos; a tile whose
outer layer changes velocity asks for the neighbors its stencil
reaches, and those are created at the end of the iteration.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, reduce
from typing import Iterator, Optional, Sequence

import numpy as np

from progressive_lbm.errors import TileExistsError
from progressive_lbm.formats.geometry import GeometryMask
from progressive_lbm.lattice import (
    AXES,
    PaddedField,
    Stencil,
    equilibrium,
    face_names,
    moments,
    speed_squared,
)
from progressive_lbm.metrics.memory import tile_footprint_bytes
from progressive_lbm.physics import ComponentParams, pr_pressure, pseudo_potential

logger = logging.getLogger(__name__)

Coords = tuple[int, ...]

MIN_EXTENT = 4


class RunMode(str, Enum):
    """Static meshes tile the bounding box up front; progressive meshes grow."""

    STATIC = "static"
    PROGRESSIVE = "progressive"


def offset_label(offset: Sequence[int]) -> str:
    """(1, -1, 0) -> '+x-y'."""
    return "".join(
        f"{'+' if o > 0 else '-'}{AXES[axis]}" for axis, o in enumerate(offset) if o != 0
    )


def interior_index(d: int) -> tuple[slice, ...]:
    return tuple(slice(1, -1) for _ in range(d))


@dataclass
class GeometryOracle:
    """Solid flags for any cell, including halo cells outside the box.

    Periodic axes wrap; cells beyond a non-periodic bound are fluid.
    """

    mask: GeometryMask
    periodic: tuple[bool, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.mask.dims

    def solid_padded(self, origin: Sequence[int], extent: int) -> np.ndarray:
        """Solid flags of a block plus a one-cell halo."""
        indices = []
        valid = []
        for axis, start in enumerate(origin):
            n = self.dims[axis]
            idx = np.arange(start - 1, start + extent + 1)
            if self.periodic[axis]:
                idx = np.mod(idx, n)
            ok = (idx >= 0) & (idx < n)
            indices.append(np.clip(idx, 0, n - 1))
            valid.append(ok)
        block = self.mask.solid[np.ix_(*indices)]
        inside = reduce(np.logical_and.outer, valid)
        result: np.ndarray = block & inside
        return result


@dataclass
class ComponentFields:
    """Double-buffered populations and moments of one component in a tile."""

    f_cur: PaddedField
    """Read buffer with halo, shape (q, *(n + 2))."""

    f_new: PaddedField
    """Write buffer with halo."""

    rho: np.ndarray
    u: np.ndarray
    u_prev: np.ndarray

    @property
    def f(self) -> np.ndarray:
        return self.f_cur.data[(slice(None),) + interior_index(self.rho.ndim)]

    @property
    def f_next(self) -> np.ndarray:
        return self.f_new.data[(slice(None),) + interior_index(self.rho.ndim)]

    def swap(self) -> None:
        self.f_cur, self.f_new = self.f_new, self.f_cur
        self.f_cur.filled.clear()
        self.f_new.filled.clear()


@dataclass(eq=False)
class Tile:
    """Fixed-size block of cells with per-component state."""

    coords: Coords
    extent: int
    solid_padded: np.ndarray
    components: list[ComponentFields]
    psi: PaddedField
    """Pseudo-potential of every component with halo, shape (ncomp, *(n + 2))."""

    owner: Optional[int] = None
    birth_iteration: int = 0

    @classmethod
    def allocate(
        cls,
        coords: Coords,
        extent: int,
        stencil: Stencil,
        n_components: int,
        solid_padded: np.ndarray,
        birth_iteration: int = 0,
    ) -> Tile:
        d = stencil.d
        cells = (extent,) * d
        padded = tuple(n + 2 for n in cells)
        components = [
            ComponentFields(
                f_cur=PaddedField(np.zeros((stencil.q,) + padded)),
                f_new=PaddedField(np.zeros((stencil.q,) + padded)),
                rho=np.zeros(cells),
                u=np.zeros((d,) + cells),
                u_prev=np.zeros((d,) + cells),
            )
            for _ in range(n_components)
        ]
        return cls(
            coords=tuple(coords),
            extent=extent,
            solid_padded=solid_padded,
            components=components,
            psi=PaddedField(np.zeros((n_components,) + padded)),
            birth_iteration=birth_iteration,
        )

    @property
    def d(self) -> int:
        return int(self.solid_padded.ndim)

    @cached_property
    def solid(self) -> np.ndarray:
        return self.solid_padded[interior_index(self.d)]

    @cached_property
    def fluid(self) -> np.ndarray:
        fluid: np.ndarray = ~self.solid
        return fluid

    @cached_property
    def fluid_count(self) -> int:
        return int(np.count_nonzero(self.fluid))

    @property
    def origin(self) -> Coords:
        return tuple(c * self.extent for c in self.coords)

    def psi_of(self, component: int) -> np.ndarray:
        """Interior view of one component's pseudo-potential."""
        return self.psi.data[(component,) + interior_index(self.d)]

    def __repr__(self) -> str:
        return f"Tile({self.coords}, owner={self.owner}, fluid={self.fluid_count})"


@dataclass
class AmbientState:
    """State of a cell that nothing has disturbed.

    Held as a one-cell tile and advanced with the same kernels as real
    tiles, so frontier ghosts and fresh tiles match untouched cells of
    a fully meshed run exactly.
    """

    cell: Tile
    params: list[ComponentParams]

    @classmethod
    def initial(cls, params: Sequence[ComponentParams], stencil: Stencil) -> AmbientState:
        d = stencil.d
        cell = Tile.allocate((), 1, stencil, len(params), np.zeros((3,) * d, dtype=bool))
        zero_u = np.zeros((d,) + (1,) * d)
        for comp, p in zip(cell.components, params):
            comp.f[...] = equilibrium(np.full((1,) * d, p.rho_ambient), zero_u, stencil)
            comp.rho[...], comp.u[...] = moments(comp.f, stencil)
            comp.u_prev[...] = comp.u
        ambient = cls(cell=cell, params=list(params))
        ambient.refresh_psi(stencil)
        return ambient

    def refresh_psi(self, stencil: Stencil) -> int:
        clamps = 0
        for c, (comp, p) in enumerate(zip(self.cell.components, self.params)):
            press = pr_pressure(comp.rho, p.eos)
            psi, n = pseudo_potential(comp.rho, press, p.g_self, stencil.cs2)
            self.cell.psi_of(c)[...] = psi
            clamps += n
        return clamps

    @property
    def d(self) -> int:
        return self.cell.d

    def rho(self, component: int) -> float:
        return float(self.cell.components[component].rho.ravel()[0])

    def u(self, component: int) -> np.ndarray:
        return self.cell.components[component].u.reshape(self.d)

    def psi(self, component: int) -> float:
        return float(self.cell.psi_of(component).ravel()[0])

    def psi_vector(self) -> np.ndarray:
        return np.array([self.psi(c) for c in range(len(self.params))])

    def populations(self, component: int) -> np.ndarray:
        """Current populations as a (q,) vector."""
        f = self.cell.components[component].f
        return f.reshape(f.shape[0])


@dataclass
class CreationRecord:
    """One entry of the append-only creation log."""

    iteration: int
    coords: Coords
    trigger: str
    """Face label from the requesting tile ('+x', '+x+y'), or 'initial'."""

    source: Optional[Coords] = None
    owner: Optional[int] = None


@dataclass
class SuppressedExpansion:
    """A requested tile that could not be created."""

    iteration: int
    """First iteration at which this request was suppressed."""

    source: Coords
    offset: Coords
    reason: str
    """'out_of_bounds' or 'capacity'."""

    count: int = 1


@dataclass(frozen=True)
class ExpansionRequest:
    """A tile asking for the neighbor at source + offset."""

    source: Coords
    offset: Coords
    target: Optional[Coords]
    """None when the neighbor lies outside the global bounds."""

    value: float
    """Largest velocity change or population deviation that fired."""

    @property
    def label(self) -> str:
        return offset_label(self.offset)


@dataclass
class ActiveReport:
    tile_count: int
    active_cells: int
    bytes_resident: int
    footprint_bytes: int
    per_device_tiles: dict[int, int] = field(default_factory=dict)


class TileMap:
    """Sparse map from tile coordinates to tiles.

    Tiles are never removed; the creation log is append-only.
    """

    def __init__(
        self,
        stencil: Stencil,
        extent: int,
        bounds: Sequence[int],
        geometry: GeometryOracle,
        n_components: int,
    ) -> None:
        """Initialize an empty map.

        Args:
            stencil: Lattice stencil.
            extent: Cells per tile side.
            bounds: Number of tiles along each axis.
            geometry: Solid flags of the bounding box.
            n_components: Fluid components per tile.

        Raises:
            ValueError: If extent is below the halo floor.
        """
        if extent < MIN_EXTENT:
            raise ValueError(f"Tile extent must be >= {MIN_EXTENT} (got {extent})")
        self.stencil = stencil
        self.extent = extent
        self.bounds = tuple(int(b) for b in bounds)
        self.geometry = geometry
        self.n_components = n_components
        self.tiles: dict[Coords, Tile] = {}
        self.creation_log: list[CreationRecord] = []
        self._suppressed: dict[tuple[Coords, Coords, str], SuppressedExpansion] = {}
        self.out_of_bounds_events = 0
        self.capacity_events = 0

    @property
    def d(self) -> int:
        return len(self.bounds)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return self.geometry.periodic

    @property
    def bounding_box_tiles(self) -> int:
        return int(np.prod(self.bounds))

    @property
    def suppressed(self) -> list[SuppressedExpansion]:
        return list(self._suppressed.values())

    def __contains__(self, coords: object) -> bool:
        return coords in self.tiles

    def __len__(self) -> int:
        return len(self.tiles)

    def __iter__(self) -> Iterator[Tile]:
        return iter(self.sorted_tiles())

    def get(self, coords: Coords) -> Optional[Tile]:
        return self.tiles.get(coords)

    def sorted_tiles(self) -> list[Tile]:
        return [self.tiles[c] for c in sorted(self.tiles)]

    def in_bounds(self, coords: Sequence[int]) -> bool:
        return all(0 <= c < b for c, b in zip(coords, self.bounds))

    def neighbor_coords(self, coords: Coords, offset: Sequence[int]) -> Optional[Coords]:
        """Coordinates of coords + offset, wrapped on periodic axes; None if outside."""
        result = []
        for axis, (c, o) in enumerate(zip(coords, offset)):
            n = c + int(o)
            if self.periodic[axis]:
                n %= self.bounds[axis]
            elif not 0 <= n < self.bounds[axis]:
                return None
            result.append(n)
        return tuple(result)

    def face_neighbor(self, coords: Coords, face: str) -> Optional[Tile]:
        axis = AXES.index(face[1])
        offset = [0] * self.d
        offset[axis] = 1 if face[0] == "+" else -1
        target = self.neighbor_coords(coords, offset)
        return self.tiles.get(target) if target is not None else None

    def face_neighbors(self, coords: Coords) -> list[Coords]:
        """Existing face neighbors, one entry per face, excluding coords itself."""
        found = []
        for face in face_names(self.d):
            tile = self.face_neighbor(coords, face)
            if tile is not None and tile.coords != coords:
                found.append(tile.coords)
        return found

    def owner_of(self, coords: Coords) -> Optional[int]:
        tile = self.tiles.get(coords)
        return tile.owner if tile is not None else None

    def active_cells(self) -> int:
        return sum(tile.fluid_count for tile in self.tiles.values())

    def record_suppressed(
        self, iteration: int, source: Coords, offset: Coords, reason: str
    ) -> None:
        key = (source, offset, reason)
        event = self._suppressed.get(key)
        if event is None:
            self._suppressed[key] = SuppressedExpansion(iteration, source, offset, reason)
            logger.debug(
                f"Suppressed expansion from {source} toward {offset_label(offset)} ({reason})"
            )
        else:
            event.count += 1
        if reason == "capacity":
            self.capacity_events += 1
        else:
            self.out_of_bounds_events += 1


def create_tile(
    tilemap: TileMap,
    coords: Coords,
    ambient: AmbientState,
    iteration: int = 0,
    trigger: str = "initial",
    source: Optional[Coords] = None,
) -> Optional[Tile]:
    """Allocate a tile at ambient state and add it to the map.

    Args:
        tilemap: The mesh.
        coords: Tile coordinates.
        ambient: Current ambient state.
        iteration: Iteration recorded in the creation log.
        trigger: Face label of the request, or 'initial'.
        source: Requesting tile, if any.

    Returns:
        The new tile, or None when coords lie outside the global bounds
        (a suppressed expansion is recorded).

    Raises:
        TileExistsError: If coords are already meshed.
    """
    coords = tuple(int(c) for c in coords)
    if not tilemap.in_bounds(coords):
        tilemap.record_suppressed(
            iteration, source if source is not None else coords, coords, "out_of_bounds"
        )
        return None
    if coords in tilemap:
        raise TileExistsError(coords)

    s = tilemap.stencil
    origin = tuple(c * tilemap.extent for c in coords)
    solid_padded = tilemap.geometry.solid_padded(origin, tilemap.extent)
    tile = Tile.allocate(
        coords, tilemap.extent, s, tilemap.n_components, solid_padded, iteration
    )
    fluid = tile.fluid
    for c, comp in enumerate(tile.components):
        f_amb = ambient.populations(c)
        for i in range(s.q):
            comp.f[i][fluid] = f_amb[i]
        comp.rho[fluid] = ambient.rho(c)
        u_amb = ambient.u(c)
        for axis in range(s.d):
            comp.u[axis][fluid] = u_amb[axis]
        comp.u_prev[...] = comp.u
        tile.psi_of(c)[...] = ambient.psi(c)

    tilemap.tiles[coords] = tile
    tilemap.creation_log.append(
        CreationRecord(iteration=iteration, coords=coords, trigger=trigger, source=source)
    )
    logger.debug(f"Created tile {coords} at iteration {iteration} (trigger {trigger})")
    return tile


def ghost_values(
    tile: Tile,
    face: str,
    tilemap: TileMap,
    ambient: AmbientState,
    kind: str,
) -> list[np.ndarray]:
    """Halo slab a tile receives on one face.

    The slab spans the full padded extent of the other axes. With an
    existing neighbor it is a copy of the neighbor's adjacent layer;
    otherwise the current ambient values.

    Args:
        tile: Receiving tile.
        face: '+x', '-y', ...
        tilemap: The mesh.
        ambient: Current ambient state.
        kind: 'psi' or 'f'.

    Returns:
        One slab per halo buffer of the given kind.
    """
    axis = AXES.index(face[1])
    n = tile.extent
    neighbor = tilemap.face_neighbor(tile.coords, face)
    buffers = halo_buffers(tile, kind)
    if neighbor is None:
        vectors = ambient_vectors(ambient, kind)
        slabs = []
        for buf, vec in zip(buffers, vectors):
            shape = list(buf.data.shape)
            shape[axis + 1] = 1
            expand = (slice(None),) + (None,) * tile.d
            slabs.append(np.broadcast_to(vec[expand], shape).copy())
        return slabs
    src_index = 1 if face[0] == "+" else n
    sel: list[slice | int] = [slice(None)] * (tile.d + 1)
    sel[axis + 1] = slice(src_index, src_index + 1)
    return [buf.data[tuple(sel)].copy() for buf in halo_buffers(neighbor, kind)]


def halo_buffers(tile: Tile, kind: str) -> list[PaddedField]:
    if kind == "psi":
        return [tile.psi]
    if kind == "f":
        return [comp.f_cur for comp in tile.components]
    raise ValueError(f"Unknown halo kind '{kind}'")


def ambient_vectors(ambient: AmbientState, kind: str) -> list[np.ndarray]:
    if kind == "psi":
        return [ambient.psi_vector()]
    return [ambient.populations(c).copy() for c in range(len(ambient.params))]


def layer_region(offset: Sequence[int], extent: int, depth: int = 1) -> tuple[slice, ...]:
    """Cells of a tile within depth layers of the neighbor at offset."""
    region = []
    for o in offset:
        if o > 0:
            region.append(slice(extent - depth, extent))
        elif o < 0:
            region.append(slice(0, depth))
        else:
            region.append(slice(0, extent))
    return tuple(region)


def reach_offsets(s: Stencil) -> list[Coords]:
    """Tile offsets a cell's stencil can reach, in stencil order."""
    return [tuple(int(c) for c in s.e[i]) for i in s.moving_dirs]


def frontier_offsets(s: Stencil, depth: int = 1) -> list[Coords]:
    """Tile offsets a disturbance within depth cells of the tile edge reaches in one step.

    One layer reaches the stencil neighbors. Two layers (a force followed
    by streaming) reach every tile of the surrounding block; the offsets
    the stencil lacks, such as the D3Q19 body diagonals, follow in
    lexicographic order.
    """
    offsets = reach_offsets(s)
    if depth > 1:
        known = set(offsets)
        for offset in itertools.product((-1, 0, 1), repeat=s.d):
            if any(offset) and offset not in known:
                offsets.append(offset)
    return offsets


def ambient_deviation(tile: Tile, ambient: AmbientState) -> np.ndarray:
    """Largest |f_i - f_ambient_i| per cell over directions and components; 0 on solids."""
    d = tile.d
    deviation = np.zeros((tile.extent,) * d)
    for c, comp in enumerate(tile.components):
        f_amb = ambient.populations(c).reshape((-1,) + (1,) * d)
        np.maximum(deviation, np.abs(comp.f - f_amb).max(axis=0), out=deviation)
    result: np.ndarray = np.where(tile.fluid, deviation, 0.0)
    return result


def evaluate_criterion(
    tile: Tile,
    tilemap: TileMap,
    threshold: float = 0.0,
    ambient: Optional[AmbientState] = None,
    depth: int = 1,
) -> list[ExpansionRequest]:
    """Activation criterion on a tile's outer layers.

    For each neighbor that is not meshed yet, the largest |u - u_prev|
    over the bordering fluid cells is compared against threshold with a
    strict inequality, for every component. Face neighbors use the whole
    face layer. Diagonal neighbors (D2Q9 corners, D3Q19 edges) are
    checked too, on the shared edge cells, because diagonal populations
    stream straight into them.

    With an ambient state the frontier guard is on as well: a neighbor
    is also requested when any population within depth layers of it
    differs from the ambient populations by more than threshold. With
    interaction forces depth is 2 and every tile of the surrounding
    block is checked, which keeps unmeshed tiles exactly at ambient.

    Args:
        tile: Tile after the moment update.
        tilemap: The mesh.
        threshold: Activation threshold S.
        ambient: Current ambient state; None checks velocity change only.
        depth: Layers the frontier guard inspects.

    Returns:
        Requests in offset order, including out-of-bounds targets.
    """
    if tile.fluid_count == 0:
        return []
    norms = [
        np.where(tile.fluid, np.sqrt(speed_squared(comp.u - comp.u_prev)), 0.0)
        for comp in tile.components
    ]
    deviation = ambient_deviation(tile, ambient) if ambient is not None else None
    offsets = frontier_offsets(tilemap.stencil, depth if deviation is not None else 1)
    requests = []
    for offset in offsets:
        target = tilemap.neighbor_coords(tile.coords, offset)
        if target is not None and target in tilemap:
            continue
        region = layer_region(offset, tile.extent)
        value = max(float(norm[region].max()) for norm in norms)
        if deviation is not None:
            band = layer_region(offset, tile.extent, depth)
            value = max(value, float(deviation[band].max()))
        if value > threshold:
            requests.append(ExpansionRequest(tile.coords, offset, target, value))
    return requests


def expand(
    tilemap: TileMap,
    requests: Sequence[ExpansionRequest],
    ambient: AmbientState,
    iteration: int,
    max_tiles: Optional[int] = None,
) -> list[Tile]:
    """Create the tiles requested during one iteration.

    Requests toward the same target are merged; the first one in
    (source, stencil order) names the trigger. Out-of-bounds requests
    and requests beyond max_tiles are recorded as suppressed.

    Returns:
        New tiles in lexicographic order, not yet assigned to a device.
    """
    targets: dict[Coords, ExpansionRequest] = {}
    for request in sorted(requests, key=lambda r: r.source):
        if request.target is None:
            tilemap.record_suppressed(iteration, request.source, request.offset, "out_of_bounds")
            continue
        if request.target in tilemap:
            continue
        targets.setdefault(request.target, request)

    created = []
    for coords in sorted(targets):
        request = targets[coords]
        if max_tiles is not None and len(tilemap) >= max_tiles:
            tilemap.record_suppressed(iteration, request.source, request.offset, "capacity")
            continue
        tile = create_tile(
            tilemap, coords, ambient, iteration, trigger=request.label, source=request.source
        )
        if tile is not None:
            created.append(tile)
    if created:
        logger.info(f"Iteration {iteration}: created {len(created)} tile(s), total {len(tilemap)}")
    return created


def active_report(tilemap: TileMap) -> ActiveReport:
    """Tile count, active fluid cells and modeled resident bytes."""
    s = tilemap.stencil
    footprint = tile_footprint_bytes(tilemap.extent, s.d, s.q, tilemap.n_components)
    per_device: dict[int, int] = {}
    for tile in tilemap.tiles.values():
        if tile.owner is not None:
            per_device[tile.owner] = per_device.get(tile.owner, 0) + 1
    return ActiveReport(
        tile_count=len(tilemap),
        active_cells=tilemap.active_cells(),
        bytes_resident=len(tilemap) * footprint,
        footprint_bytes=footprint,
        per_device_tiles=dict(sorted(per_device.items())),
    )
