"""Tests for the Peng-Robinson closure, pseudo-potential and forces."""

from __future__ import annotations

import numpy as np
import pytest

from progressive_lbm.errors import EOSDomainError
from progressive_lbm.lattice import CS2, Stencil, full_region, moments
from progressive_lbm.physics import (
    ComponentParams,
    CouplingMatrix,
    EOSParams,
    body_force,
    forcing_delta,
    inter_force,
    intra_force,
    pr_pressure,
    pseudo_potential,
)

from tests.conftest import PR_A, PR_B


def _step_profile(n: int = 4) -> np.ndarray:
    """Padded 2-D psi field: 1 on the left half, 2 on the right half."""
    psi = np.ones((n + 2, n + 2))
    psi[(n + 2) // 2 :, :] = 2.0
    return psi


def _brute_stencil_sum(values_padded: np.ndarray, s: Stencil, x: int, y: int) -> np.ndarray:
    total = np.zeros(s.d)
    for i in range(1, s.q):
        ex, ey = s.e[i]
        total += s.w[i] * values_padded[x + 1 + ex, y + 1 + ey] * s.e[i]
    return total


@pytest.mark.unit
class TestPengRobinson:
    def test_zero_density(self, pr_eos: EOSParams) -> None:
        assert pr_pressure(0.0, pr_eos) == 0.0

    def test_no_attraction(self) -> None:
        eos = EOSParams.from_coefficients(0.0, PR_B, T=0.05, T_c=0.07)
        rho = 2.0
        assert pr_pressure(rho, eos) == pytest.approx(rho * 0.05 / (1.0 - PR_B * rho))

    def test_theta_is_one_at_critical_temperature(self) -> None:
        eos = EOSParams.from_coefficients(PR_A, PR_B, T=1.0)
        at_critical = EOSParams.from_coefficients(PR_A, PR_B, T=eos.T_c)
        assert at_critical.theta == pytest.approx(1.0, abs=1e-15)

    def test_hand_evaluated_point(self) -> None:
        t_c = EOSParams.from_coefficients(PR_A, PR_B, T=1.0).T_c
        eos = EOSParams.from_coefficients(PR_A, PR_B, T=t_c)
        rho = 1.5
        b_rho = PR_B * rho
        expected = rho * t_c / (1 - b_rho) - PR_A * rho**2 / (1 + 2 * b_rho - b_rho**2)
        assert float(pr_pressure(rho, eos)) == pytest.approx(expected, rel=1e-12)

    def test_critical_temperature_from_coefficients(self) -> None:
        eos = EOSParams.from_coefficients(PR_A, PR_B, T=0.06)
        assert eos.T_c == pytest.approx(0.0729, abs=1e-4)

    def test_from_critical_inverts_coefficients(self) -> None:
        eos = EOSParams.from_critical(T_c=0.2, p_c=0.05, T=0.15)
        back = EOSParams.from_coefficients(eos.a, eos.b, T=0.15)
        assert back.T_c == pytest.approx(0.2, rel=1e-12)

    def test_pole_raises(self, pr_eos: EOSParams) -> None:
        with pytest.raises(EOSDomainError) as exc:
            pr_pressure(np.array([1.0, 1.1 / PR_B]), pr_eos)
        assert exc.value.b == PR_B

    def test_ideal_gas_reduction(self) -> None:
        rho = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(pr_pressure(rho, EOSParams.ideal_gas()), CS2 * rho)

    def test_subcritical_isotherm_has_a_loop(self, pr_eos: EOSParams) -> None:
        rho = np.linspace(0.1, 7.0, 200)
        dp = np.diff(pr_pressure(rho, pr_eos))
        assert np.any(dp < 0)


@pytest.mark.unit
class TestPseudoPotential:
    def test_ideal_gas_is_zero(self) -> None:
        rho = np.array([0.3, 1.0, 2.5])
        psi, clamps = pseudo_potential(rho, pr_pressure(rho, EOSParams.ideal_gas()), -1.0)
        assert np.all(psi == 0.0)
        assert clamps == 0

    def test_zero_density(self, pr_eos: EOSParams) -> None:
        psi, _ = pseudo_potential(0.0, pr_pressure(0.0, pr_eos), -1.0)
        assert psi == 0.0

    def test_unit_radicand(self) -> None:
        psi, clamps = pseudo_potential(1.0, CS2 - CS2 / 2.0, -1.0)
        assert float(psi) == pytest.approx(1.0, rel=1e-15)
        assert clamps == 0

    def test_negative_radicand_is_clamped(self) -> None:
        rho = np.array([1.0, 1.0])
        press = np.array([CS2 + 0.1, CS2 - 0.1])
        psi, clamps = pseudo_potential(rho, press, -1.0)
        assert psi[0] == 0.0
        assert psi[1] > 0.0
        assert clamps == 1


@pytest.mark.unit
class TestForces:
    def test_uniform_psi_gives_zero_intra_force(
        self, stencil: Stencil, pr_eos: EOSParams
    ) -> None:
        params = ComponentParams(tau=1.0, eos=pr_eos, rho_ambient=1.0)
        psi = np.full((6,) * stencil.d, 0.7)
        force = intra_force(psi, params, stencil, full_region((4,) * stencil.d))
        assert np.all(force == 0.0)

    def test_zero_psi_gives_zero_intra_force(self, d2q9: Stencil, pr_eos: EOSParams) -> None:
        params = ComponentParams(tau=1.0, eos=pr_eos, rho_ambient=1.0)
        force = intra_force(np.zeros((6, 6)), params, d2q9, full_region((4, 4)))
        assert np.all(force == 0.0)

    @pytest.mark.parametrize("beta", [1.0, 1.16, 1.5])
    def test_step_profile_matches_brute_force(
        self, d2q9: Stencil, pr_eos: EOSParams, beta: float
    ) -> None:
        params = ComponentParams(tau=1.0, eos=pr_eos, rho_ambient=1.0, beta=beta)
        psi = _step_profile()
        force = intra_force(psi, params, d2q9, full_region((4, 4)))
        half_g = 0.5 * params.g_self
        for x in range(4):
            for y in range(4):
                first = _brute_stencil_sum(psi, d2q9, x, y)
                second = _brute_stencil_sum(psi * psi, d2q9, x, y)
                expected = (
                    -beta * half_g * CS2 * psi[x + 1, y + 1] * first
                    - 0.5 * (1.0 - beta) * half_g * CS2 * second
                )
                np.testing.assert_allclose(force[:, x, y], expected, rtol=1e-13, atol=1e-15)
        # The step pulls toward the denser side only along x.
        np.testing.assert_allclose(force[1], 0.0, atol=1e-15)
        assert np.any(force[0] != 0.0)

    def test_inter_force_step_profile(self, d2q9: Stencil) -> None:
        psi_other = _step_profile()
        psi_self = np.full((4, 4), 0.5)
        force = inter_force(psi_self, psi_other, 0.8, d2q9, full_region((4, 4)))
        for x in range(4):
            for y in range(4):
                expected = -0.4 * CS2 * 0.5 * _brute_stencil_sum(psi_other, d2q9, x, y)
                np.testing.assert_allclose(force[:, x, y], expected, rtol=1e-13, atol=1e-15)

    def test_inter_force_vanishes(self, d2q9: Stencil) -> None:
        psi_self = np.ones((4, 4))
        uniform = inter_force(psi_self, np.full((6, 6), 1.3), 2.0, d2q9, full_region((4, 4)))
        uncoupled = inter_force(psi_self, _step_profile(), 0.0, d2q9, full_region((4, 4)))
        assert np.all(uniform == 0.0)
        assert np.all(uncoupled == 0.0)

    def test_body_force(self) -> None:
        force = body_force(np.array([2.0]), (0.0, -0.001, 0.0))
        np.testing.assert_allclose(force[:, 0], [0.0, -0.002, 0.0])
        assert np.all(body_force(np.array([0.0]), (0.0, -0.001)) == 0.0)


@pytest.mark.unit
class TestForcingDelta:
    def test_zero_force(self, d2q9: Stencil) -> None:
        rho = np.full(3, 1.2)
        u = np.full((2, 3), 0.02)
        delta, skipped = forcing_delta(rho, u, np.zeros((2, 3)), d2q9)
        assert np.all(delta == 0.0)
        assert skipped == 0

    def test_delta_adds_force_as_momentum(
        self, stencil: Stencil, rng: np.random.Generator
    ) -> None:
        n = 25
        rho = rng.uniform(0.5, 2.0, size=n)
        u = rng.uniform(-0.05, 0.05, size=(stencil.d, n))
        force = rng.uniform(-1e-3, 1e-3, size=(stencil.d, n))
        delta, _ = forcing_delta(rho, u, force, stencil)
        mass = delta.sum(axis=0)
        momentum = np.einsum("ia,in->an", stencil.e, delta)
        np.testing.assert_allclose(mass, 0.0, atol=1e-15)
        np.testing.assert_allclose(momentum, force, rtol=1e-10, atol=1e-15)

    def test_empty_cell_is_skipped(self, d2q9: Stencil) -> None:
        rho = np.array([0.0, 1.0])
        force = np.array([[1e-3, 1e-3], [0.0, 0.0]])
        delta, skipped = forcing_delta(rho, np.zeros((2, 2)), force, d2q9)
        assert skipped == 1
        assert np.all(delta[:, 0] == 0.0)
        _, u = moments(delta[:, 1:] + np.array(d2q9.w)[:, None], d2q9)
        assert u[0, 0] == pytest.approx(1e-3, rel=1e-10)


@pytest.mark.unit
class TestParameterValidation:
    def test_valid_component(self, ideal_params: ComponentParams) -> None:
        assert ideal_params.validate() == []

    @pytest.mark.parametrize(
        ("overrides", "fragment"),
        [
            ({"tau": 0.5}, "tau"),
            ({"beta": 2.0}, "beta"),
            ({"g_self": 0.0}, "g_self"),
            ({"rho_ambient": 0.0}, "rho_ambient"),
        ],
    )
    def test_invalid_component(self, overrides: dict[str, float], fragment: str) -> None:
        values: dict[str, object] = {
            "tau": 0.8, "eos": EOSParams.ideal_gas(), "rho_ambient": 1.0,
        }
        values.update(overrides)
        errors = ComponentParams(**values).validate()  # type: ignore[arg-type]
        assert any(fragment in e for e in errors)

    def test_ambient_beyond_pole(self, pr_eos: EOSParams) -> None:
        errors = ComponentParams(tau=1.0, eos=pr_eos, rho_ambient=11.0).validate()
        assert any("pole" in e for e in errors)

    def test_coupling_matrix(self) -> None:
        assert CouplingMatrix.from_rows([[0.0, 0.5], [0.5, 0.0]]).validate() == []
        assert CouplingMatrix.from_rows([[0.0, 0.5], [0.4, 0.0]]).validate()
        assert CouplingMatrix.from_rows([[1.0, 0.5], [0.5, 0.0]]).validate()
        assert CouplingMatrix.from_rows([[0.0, 0.5]]).validate()
