"""Phased execution of one lattice Boltzmann iteration over the tile mesh.

Each iteration runs five bulk-synchronous phases with a barrier between
them:

    P1  pressure and pseudo-potential; u is saved into u_prev
    P2  psi halo exchange
    P3  forces, forcing delta and collision, boundary layers first
    P4  population halo exchange, streaming, bounce-back, buffer swap
    P5  moments; in progressive mode, activation criterion, mesh growth
        and device assignment on the coordinator

Tiles are spread over worker threads by owner device. Within a phase a
tile only writes its own buffers, so results do not depend on the
number of workers or the order tiles are processed in.
"""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import partial
from typing import Any, Callable, Optional, Sequence, TypeVar

import numpy as np

from progressive_lbm.config import ScenarioConfig, SeedRegion
from progressive_lbm.errors import NumericalInstabilityError
from progressive_lbm.formats.geometry import GeometryMask
from progressive_lbm.lattice import (
    AXES,
    Stencil,
    bounce_back,
    collide_bgk,
    equilibrium,
    face_names,
    moments,
    stream,
)
from progressive_lbm.mesh import (
    AmbientState,
    Coords,
    ExpansionRequest,
    GeometryOracle,
    RunMode,
    Tile,
    TileMap,
    create_tile,
    evaluate_criterion,
    expand,
    ghost_values,
    halo_buffers,
)
from progressive_lbm.physics import (
    ComponentParams,
    CouplingMatrix,
    body_force,
    forcing_delta,
    inter_force,
    intra_force,
    pr_pressure,
    pseudo_potential,
)
from progressive_lbm.sched import (
    AssignmentPolicy,
    AssignmentState,
    DeviceTopology,
    assign_device,
    record_exchange,
    transfer_size,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


class Phase(str, Enum):
    PRESSURE = "P1"
    PSI_EXCHANGE = "P2"
    COLLIDE = "P3"
    STREAM = "P4"
    MOMENTS = "P5"


@dataclass
class Diagnostics:
    """Cumulative anomaly counters."""

    negative_populations: int = 0
    """Negative populations seen after streaming (never clamped)."""

    radicand_clamps: int = 0
    """Cells where the pseudo-potential radicand was negative."""

    zero_density_forces: int = 0
    """Cells with rho = 0 and a non-zero force; their forcing was skipped."""

    suppressed_expansions: int = 0
    capacity_suppressed: int = 0
    bounce_back_links: int = 0

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class TraceEvent:
    """Completion of one part of a tile's collision phase."""

    iteration: int
    coords: Coords
    part: str
    """'boundary' or 'interior'."""


@dataclass
class SimulationState:
    """Everything one run evolves."""

    stencil: Stencil
    params: list[ComponentParams]
    coupling: CouplingMatrix
    tilemap: TileMap
    topology: DeviceTopology
    assignment: AssignmentState
    ambient: AmbientState
    mode: RunMode
    policy: AssignmentPolicy = AssignmentPolicy.OPTIMIZED
    threshold: float = 0.0
    frontier_guard: bool = True
    capacity_per_device: Optional[int] = None
    iteration: int = 0
    cell_updates: int = 0
    elapsed: float = 0.0
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    trace_enabled: bool = False
    trace: list[TraceEvent] = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return len(self.params)

    @property
    def transfer_bytes(self) -> int:
        s = self.stencil
        return transfer_size(self.tilemap.extent, s.d, self.n_components, s)

    @property
    def frontier_depth(self) -> int:
        """Layers a disturbance crosses in one step: streaming, plus one for forces."""
        return 2 if any(p.eos.has_pseudo_potential for p in self.params) else 1

    @property
    def max_tiles(self) -> Optional[int]:
        if self.capacity_per_device is None:
            return None
        return self.capacity_per_device * self.topology.n_devices

    def assign(self, tile: Tile) -> int:
        """Place a new tile on a device and note the owner in the creation log."""
        device = assign_device(
            tile.coords,
            self.tilemap,
            self.topology,
            self.assignment,
            self.policy,
            self.transfer_bytes,
            self.capacity_per_device,
        )
        tile.owner = device
        for record in reversed(self.tilemap.creation_log):
            if record.coords == tile.coords:
                record.owner = device
                break
        return device

    def sync_suppressed(self) -> None:
        self.diagnostics.suppressed_expansions = self.tilemap.out_of_bounds_events
        self.diagnostics.capacity_suppressed = self.tilemap.capacity_events

    def note_clamps(self, clamps: int) -> None:
        """Count radicand clamps; the first ones of a run are logged."""
        if clamps and not self.diagnostics.radicand_clamps:
            logger.warning(
                f"Iteration {self.iteration}: negative pseudo-potential radicand in "
                f"{clamps} cell(s), psi clamped to 0 (further clamps are only counted)"
            )
        self.diagnostics.radicand_clamps += clamps

    def total_mass(self, component: Optional[int] = None) -> float:
        """Sum of rho over active fluid cells."""
        comps = range(self.n_components) if component is None else [component]
        return float(
            sum(
                tile.components[c].rho[tile.fluid].sum()
                for tile in self.tilemap.sorted_tiles()
                for c in comps
            )
        )


class WorkerPool:
    """Runs a per-tile function over all tiles, one group of tiles per worker.

    Tiles go to worker (owner mod n_workers). Returning from map is the
    phase barrier. Failures are re-raised for the lowest tile coords.
    """

    def __init__(self, n_workers: int = 1) -> None:
        self.n_workers = max(1, n_workers)
        self._executor: Optional[ThreadPoolExecutor] = None
        if self.n_workers > 1:
            self._executor = ThreadPoolExecutor(
                max_workers=self.n_workers, thread_name_prefix="lbm-worker"
            )

    def map(self, fn: Callable[[Tile], T], tiles: Sequence[Tile]) -> dict[Coords, T]:
        groups: list[list[Tile]] = [[] for _ in range(self.n_workers)]
        for tile in tiles:
            groups[(tile.owner or 0) % self.n_workers].append(tile)

        if self._executor is None:
            outcomes = [_run_group(fn, group) for group in groups]
        else:
            futures = [self._executor.submit(_run_group, fn, group) for group in groups]
            outcomes = [future.result() for future in futures]

        results: dict[Coords, T] = {}
        failures: list[tuple[Coords, BaseException]] = []
        for done, failure in outcomes:
            results.update(done)
            if failure is not None:
                failures.append(failure)
        if failures:
            raise min(failures, key=lambda item: item[0])[1]
        return results

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> WorkerPool:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


def _run_group(
    fn: Callable[[Tile], T], group: Sequence[Tile]
) -> tuple[dict[Coords, T], Optional[tuple[Coords, BaseException]]]:
    done: dict[Coords, T] = {}
    for tile in group:
        try:
            done[tile.coords] = fn(tile)
        except Exception as e:
            return done, (tile.coords, e)
    return done, None


# Initialization


def _all_tile_coords(bounds: Sequence[int]) -> list[Coords]:
    return [tuple(c) for c in itertools.product(*(range(b) for b in bounds))]


def seeded_tiles(
    seeds: Sequence[SeedRegion], bounds: Sequence[int], extent: int
) -> list[Coords]:
    """Tiles whose cells intersect any seed region, in lexicographic order."""
    d = len(bounds)
    hit = []
    for coords in _all_tile_coords(bounds):
        origin = tuple(c * extent for c in coords)
        if any(seed.mask(origin, extent, d).any() for seed in seeds):
            hit.append(coords)
    return hit


def apply_seeds(state: SimulationState, seeds: Sequence[SeedRegion]) -> int:
    """Overwrite seeded fluid cells with the seed equilibrium; later seeds win.

    Returns:
        Number of seeded cells (counted once per seed).
    """
    s = state.stencil
    seeded = 0
    for tile in state.tilemap.sorted_tiles():
        for seed in seeds:
            mask = seed.mask(tile.origin, tile.extent, s.d) & tile.fluid
            if not mask.any():
                continue
            seeded += int(np.count_nonzero(mask))
            u = seed.velocity_vector(s.d).reshape((s.d, 1))
            for comp, rho in zip(tile.components, seed.density):
                f_seed = equilibrium(np.array([rho]), u, s)[:, 0]
                for i in range(s.q):
                    comp.f[i][mask] = f_seed[i]
    return seeded


def initialize_state(
    config: ScenarioConfig,
    geometry: Optional[GeometryMask] = None,
    topology: Optional[DeviceTopology] = None,
    trace: bool = False,
) -> SimulationState:
    """Build the iteration-0 state of a scenario.

    Static runs mesh the whole bounding box; progressive runs start from
    the tiles touched by seeds plus any configured initial tiles. Every
    tile goes through device assignment in lexicographic order.

    Args:
        config: Validated scenario.
        geometry: Solid mask; loaded from the config when None.
        topology: Device topology; built from the config when None.
        trace: Record boundary/interior completion events.

    Returns:
        Initialized SimulationState at iteration 0.
    """
    stencil = config.make_stencil()
    params = config.component_params()
    mask = (geometry or config.geometry_mask()).for_domain(config.domain)
    tilemap = TileMap(
        stencil,
        config.tile_extent,
        config.bounds,
        GeometryOracle(mask, config.periodic),
        config.n_components,
    )
    topology = topology or config.devices.build_topology()
    state = SimulationState(
        stencil=stencil,
        params=params,
        coupling=config.coupling(),
        tilemap=tilemap,
        topology=topology,
        assignment=AssignmentState.empty(topology.n_devices),
        ambient=AmbientState.initial(params, stencil),
        mode=config.mode,
        policy=config.devices.policy,
        threshold=config.threshold,
        frontier_guard=config.frontier_guard,
        capacity_per_device=config.devices.max_tiles_per_device,
        trace_enabled=trace,
    )

    if config.mode is RunMode.STATIC:
        initial = _all_tile_coords(config.bounds)
    else:
        initial = sorted(
            set(seeded_tiles(config.seeds, config.bounds, config.tile_extent))
            | set(config.initial_tiles)
        )
    for coords in initial:
        if state.max_tiles is not None and len(tilemap) >= state.max_tiles:
            tilemap.record_suppressed(0, coords, coords, "capacity")
            continue
        tile = create_tile(tilemap, coords, state.ambient, 0, "initial")
        if tile is not None:
            state.assign(tile)

    apply_seeds(state, config.seeds)
    for tile in tilemap.sorted_tiles():
        _moments_phase(tile, state)
        state.note_clamps(_pressure_phase(tile, state))
    if state.mode is RunMode.PROGRESSIVE:
        # seeds next to a tile edge need their neighbors before the first step
        grow_mesh(state)
    state.sync_suppressed()
    logger.info(
        f"Initialized {config.mode.value} mesh: {len(tilemap)} tile(s) of "
        f"{config.tile_extent}^{stencil.d}, {tilemap.active_cells()} fluid cells, "
        f"{topology.n_devices} device(s)"
    )
    return state


# Per-tile phase kernels


def _check_finite(
    state: SimulationState, tile: Tile, values: np.ndarray, phase: Phase, name: str
) -> None:
    if not np.all(np.isfinite(values)):
        coords = tile.coords if tile is not state.ambient.cell else None
        raise NumericalInstabilityError(state.iteration, coords, phase.value, name)


def _pressure_phase(tile: Tile, state: SimulationState) -> int:
    """P1: save u, then pressure and psi. Solid cells carry the ambient psi."""
    clamps = 0
    solid = tile.solid
    for c, (comp, p) in enumerate(zip(tile.components, state.params)):
        comp.u_prev[...] = comp.u
        press = pr_pressure(comp.rho, p.eos)
        psi, n = pseudo_potential(comp.rho, press, p.g_self, state.stencil.cs2)
        psi[solid] = state.ambient.psi(c)
        _check_finite(state, tile, psi, Phase.PRESSURE, f"psi[{c}]")
        tile.psi_of(c)[...] = psi
        clamps += n
    return clamps


def collision_regions(extent: int, d: int) -> list[tuple[str, tuple[slice, ...]]]:
    """Disjoint regions of a tile: boundary slabs first, then the interior."""
    if extent <= 2:
        return [("boundary", tuple(slice(0, extent) for _ in range(d)))]
    regions = []
    for axis in range(d):
        for index in (0, extent - 1):
            region = []
            for other in range(d):
                if other < axis:
                    region.append(slice(1, extent - 1))
                elif other == axis:
                    region.append(slice(index, index + 1))
                else:
                    region.append(slice(0, extent))
            regions.append(("boundary", tuple(region)))
    regions.append(("interior", tuple(slice(1, extent - 1) for _ in range(d))))
    return regions


def _collide_region(tile: Tile, state: SimulationState, region: tuple[slice, ...]) -> int:
    s = state.stencil
    cells = (slice(None),) + region
    solid = tile.solid[region]
    fluid = ~solid
    psi_padded = tile.psi.data
    skipped = 0
    for c, (comp, p) in enumerate(zip(tile.components, state.params)):
        rho = comp.rho[region]
        u = comp.u[cells]
        force = intra_force(psi_padded[c], p, s, region)
        for other in range(state.n_components):
            g = state.coupling.value(c, other)
            if other != c and g != 0.0:
                force = force + inter_force(
                    tile.psi_of(c)[region], psi_padded[other], g, s, region
                )
        force = force + body_force(rho, p.gravity)
        force[:, solid] = 0.0
        delta, n = forcing_delta(rho, u, force, s)
        skipped += n
        f = comp.f[cells]
        post = collide_bgk(f, equilibrium(rho, u, s), p.tau, delta)
        f[:, fluid] = post[:, fluid]
    return skipped


def _collide_phase(tile: Tile, state: SimulationState) -> tuple[int, list[TraceEvent]]:
    """P3: forces and collision into the read buffer, boundary layers first."""
    events: list[TraceEvent] = []
    if tile.fluid_count == 0:
        return 0, events
    skipped = 0
    parts = collision_regions(tile.extent, tile.d)
    for index, (part, region) in enumerate(parts):
        skipped += _collide_region(tile, state, region)
        last_of_part = index + 1 == len(parts) or parts[index + 1][0] != part
        if state.trace_enabled and last_of_part:
            events.append(TraceEvent(state.iteration, tile.coords, part))
    for c, comp in enumerate(tile.components):
        _check_finite(state, tile, comp.f, Phase.COLLIDE, f"f[{c}]")
    return skipped, events


def _stream_phase(tile: Tile, state: SimulationState) -> tuple[int, int]:
    """P4: stream, bounce back, swap. All-solid tiles are left untouched."""
    if tile.fluid_count == 0:
        return 0, 0
    s = state.stencil
    coords = tile.coords if tile is not state.ambient.cell else None
    negatives = 0
    links = 0
    for comp in tile.components:
        stream(comp.f_cur, s, out=comp.f_next, coords=coords)
        links += bounce_back(comp.f, comp.f_next, tile.solid_padded, s)
        negatives += int(np.count_nonzero(comp.f_next[:, tile.fluid] < 0.0))
        comp.swap()
    return negatives, links


def _moments_phase(tile: Tile, state: SimulationState) -> None:
    """P5: density and velocity from the new populations."""
    for c, comp in enumerate(tile.components):
        rho, u = moments(comp.f, state.stencil)
        _check_finite(state, tile, rho, Phase.MOMENTS, f"rho[{c}]")
        _check_finite(state, tile, u, Phase.MOMENTS, f"u[{c}]")
        comp.rho[...] = rho
        comp.u[...] = u


# Halo exchange


def _fill_uniform_halos(tile: Tile, kind: str) -> None:
    d = tile.d
    for buf in halo_buffers(tile, kind):
        centre = buf.data[(slice(None),) + (slice(1, 2),) * d].copy()
        buf.data[...] = centre
        buf.filled.update(face_names(d))


def _fill_axis(tile: Tile, axis: int, state: SimulationState, kind: str) -> None:
    n = tile.extent
    for sign, index in (("-", 0), ("+", n + 1)):
        face = f"{sign}{AXES[axis]}"
        slabs = ghost_values(tile, face, state.tilemap, state.ambient, kind)
        sel: list[slice] = [slice(None)] * (tile.d + 1)
        sel[axis + 1] = slice(index, index + 1)
        for buf, slab in zip(halo_buffers(tile, kind), slabs):
            buf.data[tuple(sel)] = slab
            buf.filled.add(face)


def exchange_halos(
    state: SimulationState,
    phase: Phase,
    pool: Optional[WorkerPool] = None,
) -> int:
    """Fill every tile halo and account the transfers.

    Axes are exchanged in order with a barrier after each pass; a pass
    copies slabs over the full padded extent of the other axes, so edge
    and corner halo cells come from the diagonal neighbor through an
    intermediate tile. Faces without a neighbor get ambient ghosts, which
    are not accounted.

    Args:
        state: Simulation state.
        phase: Phase.PSI_EXCHANGE or Phase.STREAM.
        pool: Worker pool; serial when None.

    Returns:
        Number of recorded face transfers.
    """
    kind = "psi" if phase is Phase.PSI_EXCHANGE else "f"
    pool = pool or _SERIAL
    tilemap = state.tilemap
    tiles = tilemap.sorted_tiles()
    for tile in tiles:
        for buf in halo_buffers(tile, kind):
            buf.filled.clear()
    for axis in range(state.stencil.d):
        pool.map(partial(_fill_axis, axis=axis, state=state, kind=kind), tiles)
    _fill_uniform_halos(state.ambient.cell, kind)

    size = state.transfer_bytes
    transfers = 0
    for tile in tiles:
        for face in face_names(state.stencil.d):
            neighbor = tilemap.face_neighbor(tile.coords, face)
            if neighbor is None or neighbor is tile:
                continue
            assert tile.owner is not None and neighbor.owner is not None
            record_exchange(tile.owner, neighbor.owner, size, state.topology)
            transfers += 1
    return transfers


_SERIAL = WorkerPool(1)


# Mesh growth


def _criterion(tile: Tile, state: SimulationState) -> list[ExpansionRequest]:
    return evaluate_criterion(
        tile,
        state.tilemap,
        state.threshold,
        ambient=state.ambient if state.frontier_guard else None,
        depth=state.frontier_depth,
    )


def grow_mesh(state: SimulationState, pool: Optional[WorkerPool] = None) -> list[Tile]:
    """Evaluate the criterion on every tile and create and assign the requested tiles.

    New tiles are stamped with the iteration that is about to run.
    """
    pool = pool or _SERIAL
    found = pool.map(partial(_criterion, state=state), state.tilemap.sorted_tiles())
    requests: list[ExpansionRequest] = []
    for coords in sorted(found):
        requests.extend(found[coords])
    created = expand(state.tilemap, requests, state.ambient, state.iteration, state.max_tiles)
    for tile in created:
        state.assign(tile)
    state.sync_suppressed()
    return created


# The iteration


def step(state: SimulationState, pool: Optional[WorkerPool] = None) -> SimulationState:
    """Advance the state by one iteration.

    Raises:
        NumericalInstabilityError: If a non-finite value appears.
        EOSDomainError: If a density reaches the EOS pole.
    """
    pool = pool or _SERIAL
    tilemap = state.tilemap
    ambient = state.ambient.cell
    diag = state.diagnostics
    tiles = tilemap.sorted_tiles()
    active = tilemap.active_cells()

    clamps = pool.map(lambda t: _pressure_phase(t, state), tiles)
    state.note_clamps(_pressure_phase(ambient, state) + sum(clamps.values()))

    exchange_halos(state, Phase.PSI_EXCHANGE, pool)

    diag.zero_density_forces += _collide_phase(ambient, state)[0]
    collided = pool.map(lambda t: _collide_phase(t, state), tiles)
    for coords in sorted(collided):
        skipped, events = collided[coords]
        diag.zero_density_forces += skipped
        state.trace.extend(events)

    exchange_halos(state, Phase.STREAM, pool)
    _stream_phase(ambient, state)
    streamed = pool.map(lambda t: _stream_phase(t, state), tiles)
    for negatives, links in streamed.values():
        diag.negative_populations += negatives
        diag.bounce_back_links += links

    _moments_phase(ambient, state)
    pool.map(lambda t: _moments_phase(t, state), tiles)

    state.iteration += 1
    state.cell_updates += active
    if state.mode is RunMode.PROGRESSIVE:
        grow_mesh(state, pool)
    return state


class SimulationEngine:
    """Steps a state with a worker pool and times each iteration."""

    def __init__(self, state: SimulationState, workers: int = 1) -> None:
        """Initialize the engine.

        Args:
            state: Initialized simulation state.
            workers: Worker threads; one per simulated device by default.
        """
        self.state = state
        self.pool = WorkerPool(workers)

    def step(self) -> float:
        """Run one iteration; returns its wall-clock seconds."""
        start = time.perf_counter()
        step(self.state, self.pool)
        seconds = time.perf_counter() - start
        self.state.elapsed += seconds
        logger.debug(
            f"Iteration {self.state.iteration}: {len(self.state.tilemap)} tiles, {seconds:.4f}s"
        )
        return seconds

    def run(
        self,
        iterations: int,
        on_step: Optional[Callable[[SimulationState, float], None]] = None,
    ) -> SimulationState:
        for _ in range(iterations):
            seconds = self.step()
            if on_step is not None:
                on_step(self.state, seconds)
        return self.state

    def close(self) -> None:
        self.pool.close()

    def __enter__(self) -> SimulationEngine:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()
