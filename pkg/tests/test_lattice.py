"""Tests for stencils, equilibrium, moments, streaming and bounce-back."""

from __future__ import annotations

import numpy as np
import pytest

from progressive_lbm.errors import MissingGhostError
from progressive_lbm.lattice import (
    CS2,
    PaddedField,
    Stencil,
    bounce_back,
    collide_bgk,
    equilibrium,
    face_names,
    face_offset,
    make_stencil,
    moments,
    ordered_sum,
    stream,
)


def _periodic_padded(f: np.ndarray) -> PaddedField:
    """Padded copy of f with halos wrapped around, every face marked filled."""
    d = f.ndim - 1
    data = np.pad(f, [(0, 0)] + [(1, 1)] * d, mode="wrap")
    return PaddedField(data=data, filled=set(face_names(d)))


@pytest.mark.unit
class TestStencil:
    def test_sizes(self, d2q9: Stencil, d3q19: Stencil) -> None:
        assert (d2q9.q, d2q9.d) == (9, 2)
        assert (d3q19.q, d3q19.d) == (19, 3)

    def test_rest_vector_first(self, stencil: Stencil) -> None:
        assert not stencil.e[0].any()
        assert stencil.moving_dirs == tuple(range(1, stencil.q))

    def test_weights_sum_to_one(self, stencil: Stencil) -> None:
        assert stencil.w.sum() == pytest.approx(1.0, abs=1e-15)

    def test_opposites(self, stencil: Stencil) -> None:
        for i in range(stencil.q):
            assert np.array_equal(stencil.e[stencil.opp[i]], -stencil.e[i])

    def test_second_moment_isotropy(self, stencil: Stencil) -> None:
        tensor = np.einsum("i,ia,ib->ab", stencil.w, stencil.e, stencil.e)
        np.testing.assert_allclose(tensor, CS2 * np.eye(stencil.d), atol=1e-15)

    def test_crossing_count(self, d2q9: Stencil, d3q19: Stencil) -> None:
        assert d2q9.crossing_count() == 3
        assert d3q19.crossing_count() == 5

    def test_negative_dirs_mirror_positive(self, stencil: Stencil) -> None:
        for axis in range(stencil.d):
            for pos, neg in zip(stencil.positive_dirs[axis], stencil.negative_dirs[axis]):
                assert stencil.e[pos, axis] == 1
                assert np.array_equal(stencil.e[neg], -stencil.e[pos])

    def test_unknown_kind(self) -> None:
        with pytest.raises(ValueError):
            make_stencil("D3Q27")


@pytest.mark.unit
class TestEquilibriumAndMoments:
    def test_moment_identities_random_draws(
        self, stencil: Stencil, rng: np.random.Generator
    ) -> None:
        n = 1000
        rho = rng.uniform(0.05, 3.0, size=n)
        u = rng.uniform(-0.15, 0.15, size=(stencil.d, n))
        f_eq = equilibrium(rho, u, stencil)
        rho_back, u_back = moments(f_eq, stencil)
        np.testing.assert_allclose(rho_back, rho, rtol=0, atol=1e-12)
        np.testing.assert_allclose(u_back, u, rtol=0, atol=1e-12)

    def test_rest_state_weights(self, stencil: Stencil) -> None:
        f_eq = equilibrium(np.array([2.0]), np.zeros((stencil.d, 1)), stencil)
        np.testing.assert_array_equal(f_eq[:, 0], 2.0 * stencil.w)

    def test_symmetric_populations_have_exactly_zero_velocity(
        self, stencil: Stencil, rng: np.random.Generator
    ) -> None:
        f = np.empty((stencil.q, 50))
        f[0] = rng.uniform(0.1, 1.0, size=50)
        for i in stencil.moving_dirs:
            if i < stencil.opp[i]:
                f[i] = rng.uniform(0.01, 0.2, size=50)
                f[stencil.opp[i]] = f[i]
        _, u = moments(f, stencil)
        assert np.all(u == 0.0)

    def test_zero_density_gives_zero_velocity(self, d2q9: Stencil) -> None:
        rho, u = moments(np.zeros((9, 3)), d2q9)
        assert np.all(rho == 0.0)
        assert np.all(u == 0.0)

    def test_cell_result_independent_of_array_shape(
        self, d3q19: Stencil, rng: np.random.Generator
    ) -> None:
        rho = rng.uniform(0.5, 1.5, size=(4, 4, 4))
        u = rng.uniform(-0.1, 0.1, size=(3, 4, 4, 4))
        whole = equilibrium(rho, u, d3q19)
        single = equilibrium(rho[1:2, 2:3, 3:4], u[:, 1:2, 2:3, 3:4], d3q19)
        np.testing.assert_array_equal(whole[:, 1, 2, 3], single[:, 0, 0, 0])

    def test_ordered_sum_needs_terms(self) -> None:
        with pytest.raises(ValueError):
            ordered_sum([])


@pytest.mark.unit
class TestCollision:
    def test_equilibrium_is_fixed_point(self, d2q9: Stencil) -> None:
        f_eq = equilibrium(np.full(4, 1.3), np.full((2, 4), 0.03), d2q9)
        np.testing.assert_array_equal(collide_bgk(f_eq, f_eq, 0.9), f_eq)

    def test_relaxes_toward_equilibrium(self, d2q9: Stencil) -> None:
        f_eq = equilibrium(np.ones(1), np.zeros((2, 1)), d2q9)
        f = f_eq * 1.1
        post = collide_bgk(f, f_eq, 1.0)
        np.testing.assert_allclose(post, f_eq, rtol=1e-14)

    def test_collision_conserves_mass_and_momentum(
        self, d2q9: Stencil, rng: np.random.Generator
    ) -> None:
        f = rng.uniform(0.01, 0.3, size=(9, 20))
        rho, u = moments(f, d2q9)
        post = collide_bgk(f, equilibrium(rho, u, d2q9), 0.7)
        rho_post, u_post = moments(post, d2q9)
        np.testing.assert_allclose(rho_post, rho, rtol=1e-13)
        np.testing.assert_allclose(u_post, u, atol=1e-13)


@pytest.mark.unit
class TestStreaming:
    def test_population_moves_along_its_velocity(self, stencil: Stencil) -> None:
        shape = (5,) * stencil.d
        for i in stencil.moving_dirs:
            f = np.zeros((stencil.q,) + shape)
            start = (2,) * stencil.d
            f[(i,) + start] = 1.0
            out = stream(_periodic_padded(f), stencil)
            target = tuple(int(c + e) for c, e in zip(start, stencil.e[i]))
            assert out[(i,) + target] == 1.0
            assert out.sum() == 1.0

    def test_periodic_wrap(self, d2q9: Stencil) -> None:
        f = np.zeros((9, 4, 4))
        f[1, 3, 0] = 1.0
        out = stream(_periodic_padded(f), d2q9)
        assert out[1, 0, 0] == 1.0

    def test_mass_conserved_on_periodic_block(
        self, d3q19: Stencil, rng: np.random.Generator
    ) -> None:
        f = rng.uniform(0.0, 0.1, size=(19, 4, 4, 4))
        out = stream(_periodic_padded(f), d3q19)
        assert out.sum() == pytest.approx(f.sum(), rel=1e-14)

    def test_missing_ghost_raises(self, d2q9: Stencil) -> None:
        padded = PaddedField.around(np.zeros((9, 4, 4)))
        padded.filled.update({"-x", "+x", "-y"})
        with pytest.raises(MissingGhostError) as exc:
            stream(padded, d2q9, coords=(0, 1))
        assert exc.value.faces == ["+y"]
        assert exc.value.coords == (0, 1)

    def test_face_offsets(self) -> None:
        assert face_names(3) == ("-x", "+x", "-y", "+y", "-z", "+z")
        assert face_offset("+y", 3) == (0, 1, 0)
        assert face_offset("-x", 2) == (-1, 0)


@pytest.mark.unit
class TestBounceBack:
    def test_wall_reflects_outgoing_population(self, d2q9: Stencil) -> None:
        n = 4
        solid_padded = np.zeros((n + 2, n + 2), dtype=bool)
        solid_padded[4, :] = True  # interior column x = 3
        post = np.zeros((9, n, n))
        post[1, 2, :] = 0.7  # +x populations next to the wall
        out = stream(_periodic_padded(post), d2q9)
        links = bounce_back(post, out, solid_padded, d2q9)

        np.testing.assert_array_equal(out[2, 2, :], 0.7)
        assert np.all(out[:, 3, :] == 0.0)
        assert links > 0

    def test_all_solid_block_is_untouched(self, d2q9: Stencil) -> None:
        solid_padded = np.ones((6, 6), dtype=bool)
        out = np.full((9, 4, 4), 0.5)
        assert bounce_back(out.copy(), out, solid_padded, d2q9) == 0
        assert np.all(out == 0.5)

    def test_closed_channel_conserves_mass(
        self, d2q9: Stencil, rng: np.random.Generator
    ) -> None:
        n = 6
        solid_padded = np.zeros((n + 2, n + 2), dtype=bool)
        solid_padded[:, 1] = True
        solid_padded[:, n] = True
        solid = solid_padded[1:-1, 1:-1]
        post = rng.uniform(0.01, 0.1, size=(9, n, n))
        post[:, solid] = 0.0
        out = stream(_periodic_padded(post), d2q9)
        bounce_back(post, out, solid_padded, d2q9)
        assert out.sum() == pytest.approx(post.sum(), rel=1e-13)


@pytest.mark.unit
def test_equilibrium_hand_value(d2q9: Stencil) -> None:
    f_eq = equilibrium(np.array([1.0]), np.array([[0.1], [0.0]]), d2q9)
    expected = (1.0 / 9.0) * (1.0 + 0.3 + 0.045 - 0.015)
    assert f_eq[1, 0] == pytest.approx(expected, rel=1e-14)
