"""Benchmark metrics: throughput and resident memory."""

from progressive_lbm.metrics.memory import MemoryTracker, tile_footprint_bytes
from progressive_lbm.metrics.throughput import ThroughputMeter, mlups

__all__ = ["MemoryTracker", "ThroughputMeter", "mlups", "tile_footprint_bytes"]
