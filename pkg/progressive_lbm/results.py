"""Result dataclasses and formatting for benchmark runs and comparisons."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from pathlib import Path
from typing import Any, Optional

import xxhash

from progressive_lbm.errors import OutputError
from progressive_lbm.formats.fields import FieldDump
from progressive_lbm.mesh import CreationRecord, SuppressedExpansion

logger = logging.getLogger(__name__)

WALL_CLOCK_COLUMNS = ("window_mlups", "window_mlups_bbox", "window_seconds")

FOOTPRINT_FORMULA = (
    "tiles * (n_components * (2q + 2 + 2d) * extent^d * 8 + extent^d) bytes "
    "(two population buffers, rho, psi, u, u_prev as float64 plus a 1-byte solid mask)"
)


@dataclass
class ReportRow:
    """One line of the per-run time series."""

    iteration: int
    mode: str
    active_tiles: int
    active_cells: int
    domain_cells: int
    bytes_resident: int
    bytes_intra: int
    """Cumulative bytes exchanged between tiles on the same device."""

    bytes_p2p: int
    bytes_staged: int
    modeled_cost: float
    """weight_p2p * bytes_p2p + weight_staged * bytes_staged."""

    total_mass: float
    negative_populations: int
    radicand_clamps: int
    zero_density_forces: int
    suppressed_expansions: int
    capacity_suppressed: int
    window_mlups: float
    window_mlups_bbox: float
    window_seconds: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class RunSummary:
    """End-of-run totals."""

    name: str
    mode: str
    policy: str
    iterations_requested: int
    iterations_completed: int
    n_devices: int
    n_workers: int
    cell_updates: int
    elapsed_seconds: float
    mlups: float
    mlups_bbox: float
    peak_bytes_resident: int
    footprint_bytes: int
    final_tiles: int
    final_active_cells: int
    bytes_by_class: dict[str, int]
    modeled_cost: float
    per_device_tiles: dict[int, int]
    per_device_bytes: dict[int, int]
    diagnostics: dict[str, int]
    creation_log_digest: str = ""
    snapshot_digests: dict[str, str] = field(default_factory=dict)
    aborted: Optional[str] = None
    """Error message when the run stopped early."""

    footprint_formula: str = FOOTPRINT_FORMULA


def creation_log_csv(log: list[CreationRecord], d: int) -> str:
    """Creation log as CSV text: iteration, tile coords, trigger face, owner."""
    axes = ["tile_x", "tile_y", "tile_z"][:d]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["iteration", *axes, "trigger_face", "owner_device"])
    for record in log:
        owner = "" if record.owner is None else record.owner
        writer.writerow([record.iteration, *record.coords, record.trigger, owner])
    return buffer.getvalue()


def rows_csv(rows: list[ReportRow], include_wall_clock: bool = True) -> str:
    columns = ReportRow.columns()
    if not include_wall_clock:
        columns = [c for c in columns if c not in WALL_CLOCK_COLUMNS]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_dict())
    return buffer.getvalue()


def digest(text: str) -> str:
    return xxhash.xxh64(text.encode("utf-8")).hexdigest()


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise OutputError(path, str(e)) from e


@dataclass
class RunReport:
    """Complete result of one run."""

    summary: RunSummary
    rows: list[ReportRow]
    creation_log: list[CreationRecord]
    suppressed: list[SuppressedExpansion]
    snapshots: list[FieldDump]
    d: int
    created_at: datetime = field(default_factory=datetime.now)
    output_dir: Optional[Path] = None

    def creation_log_csv(self) -> str:
        return creation_log_csv(self.creation_log, self.d)

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": asdict(self.summary),
            "created_at": self.created_at.isoformat(timespec="seconds"),
            "rows": len(self.rows),
            "suppressed_expansions": [asdict(s) for s in self.suppressed],
            "snapshots": [
                {
                    "field": s.field,
                    "component": s.component,
                    "iteration": s.iteration,
                    "raw": s.raw_path.name,
                    "xxh64": s.digest,
                }
                for s in self.snapshots
            ],
        }

    def to_markdown_report(self) -> str:
        """Generate a markdown summary report.

        Returns:
            Formatted markdown string.
        """
        s = self.summary
        lines = [
            f"# Run Report: {s.name} ({s.mode})",
            "",
            f"**Date**: {self.created_at.strftime('%Y-%m-%d %H:%M:%S')}",
            f"**Iterations**: {s.iterations_completed}/{s.iterations_requested}",
            f"**Devices**: {s.n_devices} ({s.n_workers} worker(s)), policy {s.policy}",
            "",
        ]
        if s.aborted:
            lines.extend([f"**Aborted**: {s.aborted}", ""])
        lines.extend([
            "## Throughput and memory",
            "",
            "| Metric | Value |",
            "|--------|-------|",
            f"| MLUPS (active cells) | {s.mlups:.3f} |",
            f"| MLUPS (bounding box) | {s.mlups_bbox:.3f} |",
            f"| Cell updates | {s.cell_updates} |",
            f"| Elapsed | {s.elapsed_seconds:.3f}s |",
            f"| Peak resident | {s.peak_bytes_resident / 2**20:.2f} MiB |",
            f"| Final tiles | {s.final_tiles} |",
            f"| Final active cells | {s.final_active_cells} |",
            "",
            "## Communication",
            "",
            "| Class | Bytes |",
            "|-------|-------|",
        ])
        for kind, value in s.bytes_by_class.items():
            lines.append(f"| {kind} | {value} |")
        lines.extend([f"| modeled cost | {s.modeled_cost:.0f} |", ""])
        if s.per_device_tiles:
            lines.extend(["## Devices", "", "| Device | Tiles | Bytes |", "|---|---|---|"])
            for dev, count in s.per_device_tiles.items():
                lines.append(f"| {dev} | {count} | {s.per_device_bytes.get(dev, 0)} |")
            lines.append("")
        lines.extend(["## Diagnostics", ""])
        for key, value in s.diagnostics.items():
            lines.append(f"- {key}: {value}")
        lines.extend(["", f"Memory model: {s.footprint_formula}", ""])
        return "\n".join(lines)

    def write(self, output_dir: Path | str) -> Path:
        """Write report.csv, creation_log.csv, summary.json and summary.md.

        Raises:
            OutputError: If a file cannot be written.
        """
        output_dir = Path(output_dir)
        _write(output_dir / "report.csv", rows_csv(self.rows))
        _write(output_dir / "creation_log.csv", self.creation_log_csv())
        _write(output_dir / "summary.json", json.dumps(self.to_dict(), indent=2, default=str))
        _write(output_dir / "summary.md", self.to_markdown_report())
        self.output_dir = output_dir
        logger.info(f"Wrote run report to {output_dir}")
        return output_dir


@dataclass
class Checkpoint:
    """Static vs progressive field difference at one iteration."""

    iteration: int
    max_abs_diff: float
    """Largest |difference| of f, rho and u over progressive-active cells."""


@dataclass
class ComparisonResult:
    """Static and progressive runs of the same scenario."""

    static: RunReport
    progressive: RunReport
    checkpoints: list[Checkpoint]
    ambient_drift_max: float
    """Largest deviation from ambient of static cells the progressive mesh never covered."""

    created_at: datetime = field(default_factory=datetime.now)
    comparison_summary: dict[str, str] = field(default_factory=dict)

    @property
    def field_diff_max(self) -> float:
        return max((c.max_abs_diff for c in self.checkpoints), default=0.0)

    @property
    def memory_ratio(self) -> float:
        static_peak = self.static.summary.peak_bytes_resident
        if static_peak == 0:
            return 0.0
        return self.progressive.summary.peak_bytes_resident / static_peak

    def determine_summary(self) -> dict[str, str]:
        """Memory gain, throughput ratio and communication cost ratio."""
        s, p = self.static.summary, self.progressive.summary
        summary = {
            "memory_gain": f"{(1.0 - self.memory_ratio) * 100:.1f}%",
            "memory_ratio": f"{self.memory_ratio:.4f}",
            "field_diff_max": f"{self.field_diff_max:.3e}",
            "ambient_drift_max": f"{self.ambient_drift_max:.3e}",
        }
        if s.mlups > 0:
            summary["mlups_ratio"] = f"{p.mlups / s.mlups:.3f}"
        if s.modeled_cost > 0:
            summary["cost_ratio"] = f"{p.modeled_cost / s.modeled_cost:.3f}"
        self.comparison_summary = summary
        return summary

    def joined_rows(self) -> list[dict[str, Any]]:
        """Per-iteration rows of both runs side by side."""
        diffs = {c.iteration: c.max_abs_diff for c in self.checkpoints}
        static_rows = {r.iteration: r for r in self.static.rows}
        joined = []
        for prog in self.progressive.rows:
            stat = static_rows.get(prog.iteration)
            if stat is None:
                continue
            joined.append({
                "iteration": prog.iteration,
                "static_mlups": stat.window_mlups,
                "progressive_mlups": prog.window_mlups,
                "static_bytes_resident": stat.bytes_resident,
                "progressive_bytes_resident": prog.bytes_resident,
                "static_bytes_intra": stat.bytes_intra,
                "static_bytes_p2p": stat.bytes_p2p,
                "static_bytes_staged": stat.bytes_staged,
                "progressive_bytes_intra": prog.bytes_intra,
                "progressive_bytes_p2p": prog.bytes_p2p,
                "progressive_bytes_staged": prog.bytes_staged,
                "field_diff_max": diffs.get(prog.iteration, ""),
            })
        return joined

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": self.comparison_summary or self.determine_summary(),
            "checkpoints": [asdict(c) for c in self.checkpoints],
            "static": self.static.to_dict(),
            "progressive": self.progressive.to_dict(),
        }

    def to_markdown_report(self) -> str:
        summary = self.comparison_summary or self.determine_summary()
        s, p = self.static.summary, self.progressive.summary
        lines = [
            f"# Static vs Progressive: {s.name}",
            "",
            f"**Date**: {self.created_at.strftime('%Y-%m-%d %H:%M:%S')}",
            "",
            "| Metric | Static | Progressive |",
            "|--------|--------|-------------|",
            f"| MLUPS (active cells) | {s.mlups:.3f} | {p.mlups:.3f} |",
            f"| MLUPS (bounding box) | {s.mlups_bbox:.3f} | {p.mlups_bbox:.3f} |",
            f"| Peak resident bytes | {s.peak_bytes_resident} | {p.peak_bytes_resident} |",
            f"| Final tiles | {s.final_tiles} | {p.final_tiles} |",
            f"| Modeled cost | {s.modeled_cost:.0f} | {p.modeled_cost:.0f} |",
            "",
            "## Summary",
            "",
        ]
        for key, value in summary.items():
            lines.append(f"- {key}: {value}")
        lines.append("")
        return "\n".join(lines)

    def write(self, output_dir: Path | str) -> Path:
        output_dir = Path(output_dir)
        rows = self.joined_rows()
        buffer = io.StringIO()
        if rows:
            writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        _write(output_dir / "comparison.csv", buffer.getvalue())
        _write(output_dir / "comparison.json", json.dumps(self.to_dict(), indent=2, default=str))
        _write(output_dir / "comparison.md", self.to_markdown_report())
        logger.info(f"Wrote comparison report to {output_dir}")
        return output_dir
