"""Benchmark runner: single runs and static vs progressive comparisons."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from progressive_lbm.config import ScenarioConfig
from progressive_lbm.engine import SimulationEngine, SimulationState, initialize_state
from progressive_lbm.errors import EOSDomainError, NumericalInstabilityError
from progressive_lbm.formats.fields import FieldDump, dump_field
from progressive_lbm.formats.geometry import GeometryMask
from progressive_lbm.mesh import RunMode, active_report
from progressive_lbm.metrics import MemoryTracker, ThroughputMeter
from progressive_lbm.results import (
    Checkpoint,
    ComparisonResult,
    ReportRow,
    RunReport,
    RunSummary,
    creation_log_csv,
    digest,
)
from progressive_lbm.sched import DeviceTopology

logger = logging.getLogger(__name__)


def _fresh_topology(topology: DeviceTopology) -> DeviceTopology:
    """Same devices and weights with zeroed byte counters."""
    return DeviceTopology(
        topology.p2p.copy(),
        weight_p2p=topology.weight_p2p,
        weight_staged=topology.weight_staged,
        source=topology.source,
    )


def field_difference(a: SimulationState, b: SimulationState) -> float:
    """Max |a - b| of f, rho and u over the tiles of b (which must all exist in a)."""
    worst = 0.0
    for tile in b.tilemap.sorted_tiles():
        other = a.tilemap.get(tile.coords)
        if other is None:
            raise ValueError(f"Tile {tile.coords} is active in one run only")
        for mine, theirs in zip(tile.components, other.components):
            for x, y in ((mine.f, theirs.f), (mine.rho, theirs.rho), (mine.u, theirs.u)):
                worst = max(worst, float(np.max(np.abs(x - y))))
    return worst


def ambient_drift(static: SimulationState, covered: set[tuple[int, ...]]) -> float:
    """Largest deviation from the ambient state over static tiles outside covered."""
    ambient = static.ambient
    worst = 0.0
    for tile in static.tilemap.sorted_tiles():
        if tile.coords in covered or tile.fluid_count == 0:
            continue
        fluid = tile.fluid
        for c, comp in enumerate(tile.components):
            pops = ambient.populations(c)
            u_amb = ambient.u(c)
            for i in range(len(pops)):
                worst = max(worst, float(np.max(np.abs(comp.f[i][fluid] - pops[i]))))
            worst = max(worst, float(np.max(np.abs(comp.rho[fluid] - ambient.rho(c)))))
            for a in range(len(u_amb)):
                worst = max(worst, float(np.max(np.abs(comp.u[a][fluid] - u_amb[a]))))
    return worst


class _RunSession:
    """Steps one state and collects its report rows, snapshots and metrics."""

    def __init__(
        self,
        config: ScenarioConfig,
        state: SimulationState,
        output_dir: Optional[Path],
    ) -> None:
        self.config = config
        self.state = state
        self.output_dir = output_dir
        self.engine = SimulationEngine(state, workers=config.devices.n_workers)
        report = active_report(state.tilemap)
        self.memory = MemoryTracker(footprint=report.footprint_bytes)
        self.meter = ThroughputMeter(domain_cells=config.domain_cells)
        self.rows: list[ReportRow] = []
        self.snapshots: list[FieldDump] = []
        self._observe()

    @property
    def mode(self) -> RunMode:
        return self.state.mode

    def _observe(self) -> int:
        tiles = self.state.tilemap.sorted_tiles()
        owners = [t.owner for t in tiles if t.owner is not None]
        return self.memory.observe(len(tiles), owners)

    def start(self) -> None:
        self.record_row()
        if self.config.snapshot_interval > 0:
            self.snapshot()

    def advance(self) -> None:
        updates_before = self.state.cell_updates
        seconds = self.engine.step()
        self.meter.record(self.state.cell_updates - updates_before, seconds)
        self._observe()
        it = self.state.iteration
        last = it == self.config.iterations
        if it % self.config.report_interval == 0 or last:
            self.record_row()
        interval = self.config.snapshot_interval
        if interval > 0 and (it % interval == 0 or last):
            self.snapshot()

    def is_report_iteration(self) -> bool:
        return bool(self.rows) and self.rows[-1].iteration == self.state.iteration

    def record_row(self) -> ReportRow:
        state = self.state
        counters = state.topology.counters
        diag = state.diagnostics
        window_mlups, window_bbox, window_seconds = self.meter.take_window()
        row = ReportRow(
            iteration=state.iteration,
            mode=self.mode.value,
            active_tiles=len(state.tilemap),
            active_cells=state.tilemap.active_cells(),
            domain_cells=self.config.domain_cells,
            bytes_resident=len(state.tilemap) * self.memory.footprint,
            bytes_intra=counters.intra,
            bytes_p2p=counters.p2p,
            bytes_staged=counters.staged,
            modeled_cost=counters.modeled_cost(
                state.topology.weight_p2p, state.topology.weight_staged
            ),
            total_mass=state.total_mass(),
            negative_populations=diag.negative_populations,
            radicand_clamps=diag.radicand_clamps,
            zero_density_forces=diag.zero_density_forces,
            suppressed_expansions=diag.suppressed_expansions,
            capacity_suppressed=diag.capacity_suppressed,
            window_mlups=window_mlups,
            window_mlups_bbox=window_bbox,
            window_seconds=window_seconds,
        )
        self.rows.append(row)
        logger.debug(
            f"[{row.mode}] it {row.iteration}: {row.active_tiles} tiles, "
            f"{row.active_cells} cells, {row.window_mlups:.2f} MLUPS"
        )
        return row

    def snapshot(self) -> None:
        if self.output_dir is None:
            return
        for what in self.config.snapshot_fields:
            for component in range(self.state.n_components):
                self.snapshots.append(
                    dump_field(
                        self.state, self.output_dir, what, component, pgm=self.config.write_pgm
                    )
                )

    def finish(self, aborted: Optional[str] = None) -> RunReport:
        state = self.state
        config = self.config
        counters = state.topology.counters
        report = active_report(state.tilemap)
        log_csv = creation_log_csv(state.tilemap.creation_log, state.stencil.d)
        summary = RunSummary(
            name=config.name,
            mode=self.mode.value,
            policy=state.policy.value,
            iterations_requested=config.iterations,
            iterations_completed=state.iteration,
            n_devices=state.topology.n_devices,
            n_workers=self.engine.pool.n_workers,
            cell_updates=state.cell_updates,
            elapsed_seconds=self.meter.seconds,
            mlups=self.meter.total,
            mlups_bbox=self.meter.total_bbox,
            peak_bytes_resident=self.memory.peak_bytes,
            footprint_bytes=self.memory.footprint,
            final_tiles=report.tile_count,
            final_active_cells=report.active_cells,
            bytes_by_class=counters.as_dict(),
            modeled_cost=counters.modeled_cost(
                state.topology.weight_p2p, state.topology.weight_staged
            ),
            per_device_tiles=report.per_device_tiles,
            per_device_bytes=self.memory.per_device_bytes(),
            diagnostics=state.diagnostics.as_dict(),
            creation_log_digest=digest(log_csv),
            snapshot_digests={s.raw_path.name: s.digest for s in self.snapshots},
            aborted=aborted,
        )
        result = RunReport(
            summary=summary,
            rows=self.rows,
            creation_log=list(state.tilemap.creation_log),
            suppressed=list(state.tilemap.suppressed),
            snapshots=self.snapshots,
            d=state.stencil.d,
        )
        if self.output_dir is not None:
            result.write(self.output_dir)
        self.engine.close()
        return result


class SimulationRunner:
    """Runs a scenario in one mode, or both modes side by side."""

    def __init__(
        self,
        config: ScenarioConfig,
        geometry: Optional[GeometryMask] = None,
        topology: Optional[DeviceTopology] = None,
        output_dir: Optional[Path | str] = None,
        write_outputs: bool = True,
    ) -> None:
        """Initialize the runner.

        Args:
            config: Validated scenario.
            geometry: Solid mask; loaded from the config when None.
            topology: Device topology; built from the config when None.
            output_dir: Root for outputs; defaults to config.output_dir.
            write_outputs: Write reports and snapshots to disk.
        """
        self.config = config
        self.geometry = geometry if geometry is not None else config.geometry_mask()
        self.topology = topology if topology is not None else config.devices.build_topology()
        root = Path(output_dir) if output_dir is not None else config.output_dir
        self.run_root: Optional[Path] = root / config.name if write_outputs else None

    def _session(self, mode: RunMode, directory: Optional[Path]) -> _RunSession:
        config = self.config.with_overrides(mode=mode)
        state = initialize_state(config, self.geometry, _fresh_topology(self.topology))
        return _RunSession(config, state, directory)

    def _directory(self, mode: RunMode) -> Optional[Path]:
        return None if self.run_root is None else self.run_root / mode.value

    def run(self, mode: Optional[RunMode] = None) -> RunReport:
        """Run the scenario for its configured iteration count.

        Args:
            mode: Override the configured run mode.

        Returns:
            RunReport, also written to <output>/<name>/<mode>/.

        Raises:
            NumericalInstabilityError: On a non-finite value; the partial
                report is written first.
        """
        mode = mode or self.config.mode
        logger.info(
            f"Running '{self.config.name}' ({mode.value}) for {self.config.iterations} iterations"
        )
        session = self._session(mode, self._directory(mode))
        session.start()
        try:
            for _ in range(self.config.iterations):
                session.advance()
        except (NumericalInstabilityError, EOSDomainError) as e:
            logger.error(f"Run aborted at iteration {session.state.iteration}: {e}")
            session.finish(aborted=str(e))
            raise
        report = session.finish()
        s = report.summary
        logger.info(
            f"Finished '{s.name}' ({s.mode}): {s.final_tiles} tiles, {s.mlups:.2f} MLUPS, "
            f"peak {s.peak_bytes_resident} bytes"
        )
        return report

    def compare(self) -> ComparisonResult:
        """Run static and progressive modes in lockstep and compare their fields.

        At every report iteration the progressive tiles are compared with
        the static tiles at the same coordinates. At the end, static tiles
        the progressive mesh never created are compared with the ambient
        state.

        Returns:
            ComparisonResult, also written to <output>/<name>/.
        """
        logger.info(f"Comparing static and progressive runs of '{self.config.name}'")
        static = self._session(RunMode.STATIC, self._directory(RunMode.STATIC))
        progressive = self._session(RunMode.PROGRESSIVE, self._directory(RunMode.PROGRESSIVE))
        sessions = (static, progressive)
        checkpoints: list[Checkpoint] = []

        for session in sessions:
            session.start()
        checkpoints.append(Checkpoint(0, field_difference(static.state, progressive.state)))
        try:
            for _ in range(self.config.iterations):
                for session in sessions:
                    session.advance()
                if progressive.is_report_iteration():
                    checkpoints.append(
                        Checkpoint(
                            progressive.state.iteration,
                            field_difference(static.state, progressive.state),
                        )
                    )
        except (NumericalInstabilityError, EOSDomainError) as e:
            logger.error(f"Comparison aborted: {e}")
            for session in sessions:
                session.finish(aborted=str(e))
            raise

        covered = set(progressive.state.tilemap.tiles)
        result = ComparisonResult(
            static=static.finish(),
            progressive=progressive.finish(),
            checkpoints=checkpoints,
            ambient_drift_max=ambient_drift(static.state, covered),
        )
        result.determine_summary()
        if self.run_root is not None:
            result.write(self.run_root)
        logger.info(
            f"Comparison done: memory ratio {result.memory_ratio:.3f}, "
            f"max field diff {result.field_diff_max:.3e}"
        )
        return result


def run(config: ScenarioConfig, mode: Optional[RunMode] = None, **kwargs: object) -> RunReport:
    """Run a scenario; keyword arguments go to SimulationRunner."""
    return SimulationRunner(config, **kwargs).run(mode)  # type: ignore[arg-type]


def compare(config: ScenarioConfig, **kwargs: object) -> ComparisonResult:
    """Run both modes of a scenario and compare them."""
    return SimulationRunner(config, **kwargs).compare()  # type: ignore[arg-type]
