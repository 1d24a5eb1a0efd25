"""Multiphase and multicomponent closure.

Peng-Robinson pressure, the pseudo-potential built from it, the
intra- and inter-component interaction forces, gravity and the
velocity-shift forcing delta applied inside the collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from progressive_lbm.errors import EOSDomainError
from progressive_lbm.lattice import CS2, Stencil, equilibrium, ordered_sum, shifted

PR_A_FACTOR = 0.45724
PR_B_FACTOR = 0.07780


@dataclass(frozen=True)
class EOSParams:
    """Peng-Robinson coefficients of one component.

    a and b may be given directly or derived from the critical point.
    An ideal gas is the a = b = 0 reduction with R·T = cs2.
    """

    a: float
    """Attraction parameter."""

    b: float
    """Co-volume; the pressure has a pole at b·rho = 1."""

    R: float = 1.0
    T: float = 1.0
    T_c: float = 1.0
    omega: float = 0.344
    """Acentric factor."""

    @classmethod
    def from_critical(
        cls,
        T_c: float,
        p_c: float,
        T: float,
        omega: float = 0.344,
        R: float = 1.0,
    ) -> EOSParams:
        """Derive a and b from critical temperature and pressure.

        Args:
            T_c: Critical temperature.
            p_c: Critical pressure.
            T: Operating temperature.
            omega: Acentric factor.
            R: Gas constant.

        Returns:
            EOSParams with the standard Peng-Robinson a and b.
        """
        a = PR_A_FACTOR * R * R * T_c * T_c / p_c
        b = PR_B_FACTOR * R * T_c / p_c
        return cls(a=a, b=b, R=R, T=T, T_c=T_c, omega=omega)

    @classmethod
    def from_coefficients(
        cls,
        a: float,
        b: float,
        T: float,
        omega: float = 0.344,
        R: float = 1.0,
        T_c: Optional[float] = None,
    ) -> EOSParams:
        """Build from a and b, inferring T_c when it is not given."""
        if T_c is None:
            T_c = (PR_B_FACTOR / PR_A_FACTOR) * a / (b * R) if a > 0 and b > 0 else T
        return cls(a=a, b=b, R=R, T=T, T_c=T_c, omega=omega)

    @classmethod
    def ideal_gas(cls, cs2: float = CS2) -> EOSParams:
        return cls(a=0.0, b=0.0, R=1.0, T=cs2, T_c=cs2, omega=0.0)

    @property
    def is_ideal(self) -> bool:
        return self.a == 0.0 and self.b == 0.0

    @property
    def has_pseudo_potential(self) -> bool:
        """False only for the ideal gas at R·T = cs2, whose psi vanishes everywhere."""
        return not (self.is_ideal and self.R * self.T == CS2)

    @property
    def kappa(self) -> float:
        return 0.37464 + 1.54226 * self.omega - 0.26992 * self.omega * self.omega

    @property
    def theta(self) -> float:
        """Temperature function [1 + kappa(1 - sqrt(T/T_c))]^2."""
        root = 1.0 + self.kappa * (1.0 - math.sqrt(self.T / self.T_c))
        return root * root

    @property
    def critical_density(self) -> float:
        """Approximate critical density 0.2531/b (0 for b = 0)."""
        return 0.2531 / self.b if self.b > 0 else 0.0


@dataclass(frozen=True)
class ComponentParams:
    """Per-component physical parameters."""

    tau: float
    eos: EOSParams
    rho_ambient: float
    g_self: float = -1.0
    beta: float = 1.16
    gravity: tuple[float, ...] = (0.0, 0.0)
    name: str = "component"

    def validate(self) -> list[str]:
        """Return the list of invariant violations (empty when valid)."""
        errors = []
        if not self.tau > 0.5:
            errors.append(f"{self.name}: tau must be > 0.5 (got {self.tau})")
        if self.eos.b < 0:
            errors.append(f"{self.name}: eos.b must be >= 0 (got {self.eos.b})")
        if not self.rho_ambient > 0:
            errors.append(f"{self.name}: rho_ambient must be > 0 (got {self.rho_ambient})")
        if not 1.0 <= self.beta <= 1.5:
            errors.append(f"{self.name}: beta must lie in [1, 1.5] (got {self.beta})")
        if self.g_self == 0:
            errors.append(f"{self.name}: g_self must be non-zero")
        if self.eos.b > 0 and self.eos.b * self.rho_ambient >= 1.0:
            errors.append(f"{self.name}: rho_ambient lies beyond the EOS pole 1/b")
        return errors


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric inter-component coupling constants with zero diagonal."""

    g: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    @classmethod
    def zeros(cls, n_components: int) -> CouplingMatrix:
        return cls(np.zeros((n_components, n_components), dtype=np.float64))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> CouplingMatrix:
        return cls(np.array(rows, dtype=np.float64))

    @property
    def n_components(self) -> int:
        return int(self.g.shape[0])

    def value(self, alpha: int, other: int) -> float:
        return float(self.g[alpha, other])

    def validate(self) -> list[str]:
        errors = []
        if self.g.ndim != 2 or self.g.shape[0] != self.g.shape[1]:
            return [f"g_cross must be a square matrix (got shape {self.g.shape})"]
        if not np.array_equal(self.g, self.g.T):
            errors.append("g_cross must be symmetric")
        if np.any(np.diag(self.g) != 0):
            errors.append("g_cross must have a zero diagonal")
        return errors


def pr_pressure(rho: np.ndarray | float, eos: EOSParams) -> np.ndarray:
    """Peng-Robinson pressure.

    p = rho R T / (1 - b rho) - a theta rho^2 / (1 + 2 b rho - b^2 rho^2)

    Args:
        rho: Density field.
        eos: EOS coefficients.

    Returns:
        Pressure with the shape of rho.

    Raises:
        EOSDomainError: If b·rho >= 1 anywhere.
    """
    rho = np.asarray(rho, dtype=np.float64)
    b_rho = eos.b * rho
    if eos.b > 0 and np.any(b_rho >= 1.0):
        worst = float(rho.max())
        raise EOSDomainError(worst, eos.b)
    repulsion = rho * eos.R * eos.T / (1.0 - b_rho)
    attraction = eos.a * eos.theta * rho * rho / (1.0 + 2.0 * b_rho - b_rho * b_rho)
    result: np.ndarray = repulsion - attraction
    return result


def pseudo_potential(
    rho: np.ndarray | float,
    press: np.ndarray | float,
    g_self: float,
    cs2: float = CS2,
) -> tuple[np.ndarray, int]:
    """Pseudo-potential psi = sqrt(2 (p - cs2 rho) / (cs2 g_self)).

    Cells with a negative radicand get psi = 0.

    Args:
        rho: Density field.
        press: Pressure field from the EOS.
        g_self: Self-coupling constant.
        cs2: Lattice sound speed squared.

    Returns:
        Tuple (psi, clamped cell count).
    """
    rho = np.asarray(rho, dtype=np.float64)
    press = np.asarray(press, dtype=np.float64)
    radicand = 2.0 * (press - cs2 * rho) / (cs2 * g_self)
    negative = radicand < 0.0
    clamps = int(np.count_nonzero(negative))
    psi = np.sqrt(np.where(negative, 0.0, radicand))
    return psi, clamps


def stencil_sum(
    values_padded: np.ndarray,
    s: Stencil,
    region: tuple[slice, ...],
) -> np.ndarray:
    """Sum of w_i value(x + e_i) e_i over the moving directions.

    Args:
        values_padded: Scalar field with a one-cell halo.
        s: Stencil.
        region: Cells to evaluate, in interior coordinates.

    Returns:
        Vector field of shape (d, *region).
    """
    comps = []
    for axis in range(s.d):
        plus = ordered_sum(
            s.w[i] * shifted(values_padded, s.e[i], region) for i in s.positive_dirs[axis]
        )
        minus = ordered_sum(
            s.w[i] * shifted(values_padded, s.e[i], region) for i in s.negative_dirs[axis]
        )
        comps.append(plus - minus)
    return np.stack(comps)


def intra_force(
    psi_padded: np.ndarray,
    params: ComponentParams,
    s: Stencil,
    region: tuple[slice, ...],
) -> np.ndarray:
    """Self-interaction force of one component.

    F = -beta (g/2) cs2 psi(x) S[psi] - ((1 - beta)/2) (g/2) cs2 S[psi^2]
    where S is the weighted stencil sum.
    """
    half_g = 0.5 * params.g_self
    c_psi = -params.beta * half_g * s.cs2
    c_psi2 = -0.5 * (1.0 - params.beta) * half_g * s.cs2
    psi_x = shifted(psi_padded, (0,) * s.d, region)
    first = stencil_sum(psi_padded, s, region)
    second = stencil_sum(psi_padded * psi_padded, s, region)
    result: np.ndarray = c_psi * psi_x * first + c_psi2 * second
    return result


def inter_force(
    psi_self: np.ndarray,
    psi_other_padded: np.ndarray,
    g_cross: float,
    s: Stencil,
    region: tuple[slice, ...],
) -> np.ndarray:
    """Cross-component force -(g_cross/2) cs2 psi_self(x) S[psi_other]."""
    coeff = -0.5 * g_cross * s.cs2
    result: np.ndarray = coeff * psi_self * stencil_sum(psi_other_padded, s, region)
    return result


def body_force(rho: np.ndarray, gravity: Sequence[float]) -> np.ndarray:
    """F = rho * gravity."""
    rho = np.asarray(rho, dtype=np.float64)
    return np.stack([rho * float(g) for g in gravity])


def forcing_delta(
    rho: np.ndarray,
    u: np.ndarray,
    force: np.ndarray,
    s: Stencil,
) -> tuple[np.ndarray, int]:
    """Velocity-shift forcing.

    delta_f = f_eq(rho, u + F/rho) - f_eq(rho, u)

    Args:
        rho: Density field.
        u: Velocity field (d, *cells).
        force: Total force field (d, *cells).
        s: Stencil.

    Returns:
        Tuple (delta_f, number of cells with rho = 0 and non-zero force).
    """
    rho = np.asarray(rho, dtype=np.float64)
    empty = rho == 0.0
    pushed = np.zeros(rho.shape, dtype=bool)
    for axis in range(s.d):
        pushed |= force[axis] != 0.0
    skipped = int(np.count_nonzero(empty & pushed))
    safe = np.where(empty, 1.0, rho)
    du = np.stack([np.where(empty, 0.0, force[axis] / safe) for axis in range(s.d)])
    delta: np.ndarray = equilibrium(rho, u + du, s) - equilibrium(rho, u, s)
    return delta, skipped
