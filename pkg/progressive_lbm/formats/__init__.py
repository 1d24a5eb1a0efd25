"""File formats: geometry masks and field snapshots."""

from progressive_lbm.formats.fields import FieldDump, dense_field, dump_field, read_raw
from progressive_lbm.formats.geometry import GeometryMask, generate, load_geometry, save_geometry

__all__ = [
    "FieldDump",
    "GeometryMask",
    "dense_field",
    "dump_field",
    "generate",
    "load_geometry",
    "read_raw",
    "save_geometry",
]
