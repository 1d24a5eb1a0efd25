"""Throughput metrics in million lattice updates per second."""

from __future__ import annotations

from dataclasses import dataclass


def mlups(cell_updates: int | float, seconds: float) -> float:
    """Million lattice updates per second (0 when no time has elapsed)."""
    if seconds <= 0:
        return 0.0
    return float(cell_updates) / seconds / 1e6


@dataclass
class ThroughputMeter:
    """Accumulates cell updates and wall time, overall and per window.

    Two counts are kept: updates of active fluid cells (the honest
    progressive throughput) and updates of the full bounding box (the
    fixed-domain figure).
    """

    domain_cells: int
    """Cells in the full bounding box."""

    cell_updates: int = 0
    bbox_updates: int = 0
    seconds: float = 0.0
    _window_updates: int = 0
    _window_bbox: int = 0
    _window_seconds: float = 0.0

    def record(self, active_cells: int, seconds: float) -> None:
        """Account one iteration."""
        self.cell_updates += active_cells
        self.bbox_updates += self.domain_cells
        self.seconds += seconds
        self._window_updates += active_cells
        self._window_bbox += self.domain_cells
        self._window_seconds += seconds

    def take_window(self) -> tuple[float, float, float]:
        """Return (window mlups, window mlups_bbox, window seconds) and reset."""
        result = (
            mlups(self._window_updates, self._window_seconds),
            mlups(self._window_bbox, self._window_seconds),
            self._window_seconds,
        )
        self._window_updates = 0
        self._window_bbox = 0
        self._window_seconds = 0.0
        return result

    @property
    def total(self) -> float:
        return mlups(self.cell_updates, self.seconds)

    @property
    def total_bbox(self) -> float:
        return mlups(self.bbox_updates, self.seconds)
