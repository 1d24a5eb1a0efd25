"""Resident-memory model for tiles."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

BYTES_PER_VALUE = 8
BYTES_PER_MASK_CELL = 1


def tile_footprint_bytes(extent: int, d: int, q: int, n_components: int) -> int:
    """Bytes resident for one tile.

    Per component: two population buffers (2q), rho, psi, and the
    current and previous velocity (2d), all float64. One byte per
    cell for the solid mask.

    Args:
        extent: Cells per tile side.
        d: Spatial dimension.
        q: Stencil size.
        n_components: Number of fluid components.

    Returns:
        Footprint in bytes.
    """
    cells = extent**d
    values_per_cell = n_components * (2 * q + 2 + 2 * d)
    return values_per_cell * cells * BYTES_PER_VALUE + cells * BYTES_PER_MASK_CELL


@dataclass
class MemoryTracker:
    """Tracks resident bytes and their peak over a run."""

    footprint: int
    """Bytes per tile."""

    peak_bytes: int = 0
    per_device_tiles: dict[int, int] = field(default_factory=lambda: defaultdict(int))

    def observe(self, tile_count: int, owners: list[int] | None = None) -> int:
        """Record the current tile count; returns the resident bytes."""
        resident = tile_count * self.footprint
        if resident > self.peak_bytes:
            logger.debug(f"Resident bytes peak {self.peak_bytes} -> {resident}")
            self.peak_bytes = resident
        if owners is not None:
            self.per_device_tiles = defaultdict(int)
            for owner in owners:
                self.per_device_tiles[owner] += 1
        return resident

    def per_device_bytes(self) -> dict[int, int]:
        return {dev: n * self.footprint for dev, n in sorted(self.per_device_tiles.items())}
