"""Error classes for progressive lattice Boltzmann runs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence


class ProgressiveLBMError(Exception):
    """Base exception for simulator errors.

    All custom exceptions in this package inherit from this class,
    enabling catch-all handling in the CLI.
    """

    pass


class ConfigValidationError(ProgressiveLBMError):
    """Scenario configuration failed validation.

    Collects every per-field message so a user can fix a scenario
    file in one pass instead of one error at a time.
    """

    def __init__(self, errors: Sequence[str], path: Optional[Path] = None) -> None:
        self.errors = list(errors)
        self.path = path
        where = f" in {path}" if path else ""
        joined = "; ".join(self.errors)
        super().__init__(f"Invalid configuration{where}: {joined}")


class GeometryFormatError(ProgressiveLBMError):
    """Geometry file could not be parsed.

    Raised for a malformed header, a dimension mismatch or a
    truncated payload, each with its own message.
    """

    def __init__(self, path: Path | str, message: str) -> None:
        self.path = Path(path)
        self.message = message
        super().__init__(f"Geometry error ({self.path}): {message}")


class TopologyFormatError(ProgressiveLBMError):
    """Device topology file is malformed or violates the P2P invariants."""

    def __init__(self, path: Path | str | None, message: str) -> None:
        self.path = Path(path) if path else None
        self.message = message
        where = f" ({self.path})" if self.path else ""
        super().__init__(f"Topology error{where}: {message}")


class EOSDomainError(ProgressiveLBMError):
    """Density reached the Peng-Robinson pole b·rho >= 1."""

    def __init__(self, rho: float, b: float) -> None:
        self.rho = rho
        self.b = b
        super().__init__(f"Peng-Robinson pole reached: b*rho = {b * rho:.6g} >= 1 (rho={rho:.6g})")


class TileExistsError(ProgressiveLBMError):
    """A tile was created at coordinates that are already meshed."""

    def __init__(self, coords: tuple[int, ...]) -> None:
        self.coords = coords
        super().__init__(f"Tile {coords} already exists")


class MissingGhostError(ProgressiveLBMError):
    """Streaming was attempted without halo data on a face.

    This always indicates an engine bug: every face must be filled
    either from a neighbor tile or from ambient ghosts.
    """

    def __init__(self, coords: Optional[tuple[int, ...]], faces: Sequence[str]) -> None:
        self.coords = coords
        self.faces = list(faces)
        where = f" of tile {coords}" if coords is not None else ""
        super().__init__(f"Missing ghost data on face(s) {', '.join(self.faces)}{where}")


class NumericalInstabilityError(ProgressiveLBMError):
    """Non-finite value detected during a step.

    Captures the iteration, tile and phase so the abort can be traced
    back to the kernel that produced it.
    """

    def __init__(
        self,
        iteration: int,
        coords: Optional[tuple[int, ...]],
        phase: str,
        field: str,
    ) -> None:
        self.iteration = iteration
        self.coords = coords
        self.phase = phase
        self.field = field
        where = f"tile {coords}" if coords is not None else "ambient state"
        super().__init__(
            f"Non-finite {field} at iteration {iteration}, {where}, phase {phase}"
        )


class OutputError(ProgressiveLBMError):
    """Writing a report or field dump failed."""

    def __init__(self, path: Path | str, message: str) -> None:
        self.path = Path(path)
        self.message = message
        super().__init__(f"Output error ({self.path}): {message}")
