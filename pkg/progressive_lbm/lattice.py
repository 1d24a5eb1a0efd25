"""Stencils and the core lattice Boltzmann kernels.

Array conventions (lattice units, dx = dt = 1):

    f    populations, shape (q, *cells)
    rho  density, shape (*cells)
    u    velocity, shape (d, *cells)

Every reduction over directions or axes is an explicit left-to-right
accumulation in a fixed order. Momentum and stencil sums are taken as
(sum over +a directions) - (sum over mirrored -a directions), so a
pairwise-symmetric population set gives a velocity of exactly zero.
The result of a kernel on a cell therefore does not depend on the
shape of the array the cell is part of.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from progressive_lbm.errors import MissingGhostError

CS2 = 1.0 / 3.0
AXES = "xyz"


class StencilKind(str, Enum):
    """Supported velocity sets."""

    D2Q9 = "D2Q9"
    D3Q19 = "D3Q19"


_VELOCITIES: dict[StencilKind, list[tuple[int, ...]]] = {
    StencilKind.D2Q9: [
        (0, 0),
        (1, 0), (-1, 0), (0, 1), (0, -1),
        (1, 1), (-1, -1), (1, -1), (-1, 1),
    ],
    StencilKind.D3Q19: [
        (0, 0, 0),
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
        (1, 1, 0), (-1, -1, 0), (1, -1, 0), (-1, 1, 0),
        (1, 0, 1), (-1, 0, -1), (1, 0, -1), (-1, 0, 1),
        (0, 1, 1), (0, -1, -1), (0, 1, -1), (0, -1, 1),
    ],
}

# Rest, axis and diagonal weights.
_WEIGHTS: dict[StencilKind, tuple[float, float, float]] = {
    StencilKind.D2Q9: (4.0 / 9.0, 1.0 / 9.0, 1.0 / 36.0),
    StencilKind.D3Q19: (1.0 / 3.0, 1.0 / 18.0, 1.0 / 36.0),
}


@dataclass(frozen=True, eq=False)
class Stencil:
    """Discrete velocity set with weights and opposite-direction map."""

    kind: StencilKind
    e: np.ndarray
    """Integer lattice velocities, shape (q, d)."""

    w: np.ndarray
    """Weights, shape (q,)."""

    opp: np.ndarray
    """Index of -e[i] for every i."""

    cs2: float = CS2

    @property
    def q(self) -> int:
        return int(self.e.shape[0])

    @property
    def d(self) -> int:
        return int(self.e.shape[1])

    @cached_property
    def positive_dirs(self) -> tuple[tuple[int, ...], ...]:
        """Per axis, the directions with e[i, axis] = +1."""
        return tuple(
            tuple(int(i) for i in range(self.q) if self.e[i, axis] == 1)
            for axis in range(self.d)
        )

    @cached_property
    def negative_dirs(self) -> tuple[tuple[int, ...], ...]:
        """Per axis, opp of positive_dirs in the same order (mirrored pairs)."""
        return tuple(
            tuple(int(self.opp[i]) for i in pos) for pos in self.positive_dirs
        )

    @cached_property
    def moving_dirs(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.q) if np.any(self.e[i] != 0))

    def crossing_count(self) -> int:
        """Number of populations crossing a face (e . n = 1)."""
        return len(self.positive_dirs[0])

    def __repr__(self) -> str:
        return f"Stencil({self.kind.value}, q={self.q}, d={self.d})"


def make_stencil(kind: StencilKind | str) -> Stencil:
    """Build a D2Q9 or D3Q19 stencil.

    Args:
        kind: Stencil name.

    Returns:
        Stencil with rest vector first and the standard weights.
    """
    kind = StencilKind(kind)
    vectors = _VELOCITIES[kind]
    e = np.array(vectors, dtype=np.int64)
    w_rest, w_axis, w_diag = _WEIGHTS[kind]
    norms = np.abs(e).sum(axis=1)
    w = np.where(norms == 0, w_rest, np.where(norms == 1, w_axis, w_diag)).astype(np.float64)
    index = {v: i for i, v in enumerate(vectors)}
    opp = np.array([index[tuple(-c for c in v)] for v in vectors], dtype=np.int64)
    e.setflags(write=False)
    w.setflags(write=False)
    opp.setflags(write=False)
    return Stencil(kind=kind, e=e, w=w, opp=opp)


def ordered_sum(terms: Iterable[np.ndarray | float]) -> np.ndarray:
    """Left-to-right sum of arrays, independent of array layout."""
    total: Optional[np.ndarray] = None
    for term in terms:
        if total is None:
            total = np.array(term, dtype=np.float64, copy=True)
        else:
            total = total + term
    if total is None:
        raise ValueError("ordered_sum needs at least one term")
    return total


def velocity_dot(s: Stencil, u: np.ndarray) -> np.ndarray:
    """e_i . u for every direction, shape (q, *cells)."""
    u = np.asarray(u, dtype=np.float64)
    zero = np.zeros(u.shape[1:], dtype=np.float64)
    rows = []
    for i in range(s.q):
        acc = zero
        for axis in range(s.d):
            c = int(s.e[i, axis])
            if c == 1:
                acc = acc + u[axis]
            elif c == -1:
                acc = acc - u[axis]
        rows.append(acc)
    return np.stack(rows)


def speed_squared(u: np.ndarray) -> np.ndarray:
    """|u|^2 with a fixed axis order."""
    u = np.asarray(u, dtype=np.float64)
    return ordered_sum(u[axis] * u[axis] for axis in range(u.shape[0]))


def equilibrium(rho: np.ndarray | float, u: np.ndarray, s: Stencil) -> np.ndarray:
    """Second-order equilibrium populations.

    f_eq[i] = w[i] rho (1 + e.u/cs2 + (e.u)^2/(2 cs2^2) - u^2/(2 cs2))

    Args:
        rho: Density, shape (*cells).
        u: Velocity, shape (d, *cells).
        s: Stencil.

    Returns:
        Equilibrium populations, shape (q, *cells).
    """
    rho = np.asarray(rho, dtype=np.float64)
    eu = velocity_dot(s, u)
    usq = speed_squared(u)
    inv_cs2 = 1.0 / s.cs2
    half_inv_cs4 = 0.5 * inv_cs2 * inv_cs2
    half_inv_cs2 = 0.5 * inv_cs2
    rows = []
    for i in range(s.q):
        poly = 1.0 + eu[i] * inv_cs2 + eu[i] * eu[i] * half_inv_cs4 - usq * half_inv_cs2
        rows.append(s.w[i] * rho * poly)
    return np.stack(rows)


def moments(f: np.ndarray, s: Stencil) -> tuple[np.ndarray, np.ndarray]:
    """Density and velocity of a population set.

    Cells with zero density get u = 0 by convention.

    Args:
        f: Populations, shape (q, *cells).
        s: Stencil.

    Returns:
        Tuple (rho, u) with shapes (*cells) and (d, *cells).
    """
    f = np.asarray(f, dtype=np.float64)
    rho = ordered_sum(f[i] for i in range(s.q))
    empty = rho == 0.0
    safe = np.where(empty, 1.0, rho)
    comps = []
    for axis in range(s.d):
        plus = ordered_sum(f[i] for i in s.positive_dirs[axis])
        minus = ordered_sum(f[i] for i in s.negative_dirs[axis])
        comps.append(np.where(empty, 0.0, (plus - minus) / safe))
    return rho, np.stack(comps)


def collide_bgk(
    f: np.ndarray,
    f_eq: np.ndarray,
    tau: float,
    delta_f: np.ndarray | float = 0.0,
) -> np.ndarray:
    """SRT-BGK relaxation with an additive forcing delta.

    Uses the standard sign f + (f_eq - f)/tau, which relaxes toward
    equilibrium.
    """
    return f + (1.0 / tau) * (f_eq - f) + delta_f


# ---------------------------------------------------------------- halos


def face_names(d: int) -> tuple[str, ...]:
    return tuple(f"{sign}{AXES[axis]}" for axis in range(d) for sign in "-+")


def face_offset(face: str, d: int) -> tuple[int, ...]:
    """'+y' -> (0, 1, 0) for d = 3."""
    axis = AXES.index(face[1])
    offset = [0] * d
    offset[axis] = 1 if face[0] == "+" else -1
    return tuple(offset)


@dataclass
class PaddedField:
    """Per-cell vector field with a one-cell halo on every side.

    data has shape (k, *(n + 2)); interior cells sit at [1:-1] on every
    spatial axis. filled records the faces whose halo slab has been
    written.
    """

    data: np.ndarray
    filled: set[str] = field(default_factory=set)

    @classmethod
    def around(cls, interior: np.ndarray) -> PaddedField:
        """Allocate a padded copy of interior (shape (k, *cells))."""
        shape = (interior.shape[0],) + tuple(n + 2 for n in interior.shape[1:])
        data = np.zeros(shape, dtype=interior.dtype)
        data[(slice(None),) + tuple(slice(1, -1) for _ in interior.shape[1:])] = interior
        return cls(data=data)

    @property
    def d(self) -> int:
        return self.data.ndim - 1

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(n - 2 for n in self.data.shape[1:])

    def missing_faces(self) -> list[str]:
        return [face for face in face_names(self.d) if face not in self.filled]


def shifted(padded: np.ndarray, offset: Iterable[int], region: tuple[slice, ...]) -> np.ndarray:
    """View of padded values at region + offset (region in interior coordinates)."""
    index = tuple(
        slice(r.start + 1 + int(o), r.stop + 1 + int(o)) for r, o in zip(region, offset)
    )
    return padded[(Ellipsis,) + index]


def full_region(shape: tuple[int, ...]) -> tuple[slice, ...]:
    return tuple(slice(0, n) for n in shape)


def stream(
    padded: PaddedField,
    s: Stencil,
    out: Optional[np.ndarray] = None,
    coords: Optional[tuple[int, ...]] = None,
) -> np.ndarray:
    """Pull-stream post-collision populations.

    out[i][x] = padded[i][x - e_i], with x - e_i resolved through the halo.

    Args:
        padded: Post-collision populations with filled halos.
        s: Stencil.
        out: Write buffer, shape (q, *cells). Allocated when None.
        coords: Tile coordinates for error context.

    Returns:
        The write buffer.

    Raises:
        MissingGhostError: If any face halo was never filled.
    """
    missing = padded.missing_faces()
    if missing:
        raise MissingGhostError(coords, missing)
    shape = padded.interior_shape
    if out is None:
        out = np.empty((s.q,) + shape, dtype=np.float64)
    region = full_region(shape)
    for i in range(s.q):
        out[i] = shifted(padded.data[i], -s.e[i], region)
    return out


def bounce_back(
    post: np.ndarray,
    out: np.ndarray,
    solid_padded: np.ndarray,
    s: Stencil,
) -> int:
    """Half-way bounce-back on a streamed write buffer.

    A population that would have arrived from a solid cell is replaced
    by the post-collision population that left the cell toward it,
    reversed. Solid cells hold no populations.

    Args:
        post: Post-collision populations of the tile, shape (q, *cells).
        out: Streamed write buffer, modified in place.
        solid_padded: Solid mask with halo, shape (*(n + 2)).
        s: Stencil.

    Returns:
        Number of reflected links.
    """
    region = full_region(out.shape[1:])
    solid = solid_padded[tuple(slice(1, -1) for _ in region)]
    fluid = ~solid
    if not fluid.any():
        return 0
    links = 0
    for i in s.moving_dirs:
        from_solid = shifted(solid_padded, -s.e[i], region) & fluid
        if from_solid.any():
            out[i][from_solid] = post[s.opp[i]][from_solid]
            links += int(from_solid.sum())
    if solid.any():
        out[:, solid] = 0.0
    return links
