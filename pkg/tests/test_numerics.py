import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinspec.coefficients import CoefficientDescriptor, Piece, sgn_weight
from kreinspec.numerics import (Grid, NonIntegrable, NotHermitian, Tolerances, herm_eig,
                                ode_integrate, quad_weighted)
from kreinspec.spectral_solver import fundamental_b_vectors


def inverse_sqrt_weight(exponent=-0.5):
    return CoefficientDescriptor((Piece((-1.0, 0.0), 1.0, 0.0, 0.0, (1.0,)),
                                  Piece((0.0, 1.0), 1.0, 0.0, exponent, (1.0,))), "q")


class TestQuadrature:
    def test_odd_integrand_vanishes(self):
        assert abs(quad_weighted(np.sign, None, (-1, 1)).value) < 1e-14

    def test_abs_sign_weight_integrates_to_two(self):
        res = quad_weighted(lambda x: np.ones_like(x), sgn_weight().absolute(), (-1, 1))
        assert res.value == pytest.approx(2.0, abs=1e-12)

    def test_inverse_sqrt_singularity(self):
        res = quad_weighted(lambda x: np.ones_like(x), inverse_sqrt_weight(), (0, 1))
        assert res.value == pytest.approx(2.0, rel=1e-9)
        assert res.error < 1e-8

    def test_nonintegrable_exponent_rejected(self):
        with pytest.raises(NonIntegrable):
            quad_weighted(lambda x: np.ones_like(x), inverse_sqrt_weight(-1.0), (0, 1))

    @given(st.integers(0, 12))
    def test_monomials_exact(self, k):
        res = quad_weighted(lambda x: x ** k, None, (0, 1))
        assert res.value == pytest.approx(1.0 / (k + 1), rel=1e-12)

    def test_refinement_reduces_grid_error(self):
        f = np.exp
        exact = math.e - 1 / math.e
        coarse = Grid.uniform(4, 4)
        fine = coarse.refined()
        e1 = abs(coarse.integrate(f(coarse.nodes)) - exact)
        e2 = abs(fine.integrate(f(fine.nodes)) - exact)
        assert e2 <= e1 / 4 or e2 < 1e-14


class TestGrid:
    def test_mandatory_breaks_and_interior_nodes(self):
        g = Grid.uniform(6, 5)
        for b in (-1, -0.5, 0, 0.5, 1):
            assert np.isclose(g.breaks, b).any()
        assert not np.isin(g.nodes, g.breaks).any()
        assert np.all(np.diff(g.nodes) > 0)
        assert g.weights.sum() == pytest.approx(2.0, abs=1e-13)

    def test_cumulative_matrix_integrates_polynomials(self):
        g = Grid.uniform(8, 8)
        x = g.nodes
        assert np.allclose(g.cumulative_matrix() @ (3 * x ** 2), x ** 3 + 1, atol=1e-12)

    def test_derivative_matrix(self):
        g = Grid.uniform(8, 10)
        x = g.nodes
        assert np.allclose(g.derivative_matrix() @ np.sin(x), np.cos(x), atol=1e-8)

    def test_mirror_index(self):
        g = Grid.uniform(16, 6)
        mi = g.mirror_index()
        assert np.allclose(g.nodes[mi], -g.nodes, atol=1e-14)
        with pytest.raises(ValueError):
            Grid([-1, -0.3, 1], 4).mirror_index()

    def test_jumps_detect_discontinuity(self):
        g = Grid.uniform(4, 6)
        j = g.jumps(np.where(g.nodes > 0, 1.0, 0.0))
        assert np.max(np.abs(j)) == pytest.approx(1.0)
        assert np.max(np.abs(g.jumps(g.nodes ** 3))) < 1e-12


class TestTolerances:
    def test_defaults(self):
        t = Tolerances()
        assert (t.ode_rel, t.quad_tol, t.root_tol, t.eig_tol) == (1e-10, 1e-10, 1e-9, 1e-10)

    @pytest.mark.parametrize("bad", [dict(ode_rel=0.0), dict(eig_tol=-1.0), dict(root_tol=1e-17)])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            Tolerances(**bad)


class TestODE:
    def test_constant_solution(self, p0):
        traj = ode_integrate(p0.system(0.0), [1.0, 0.0])
        states = traj(np.linspace(-1, 1, 9))
        assert np.allclose(states[:, 0], 1.0, atol=1e-12)
        assert np.allclose(states[:, 1], 0.0, atol=1e-12)

    def test_linear_solution(self, p0):
        traj = ode_integrate(p0.system(0.0), [0.0, 1.0])
        end = traj([1.0])[0]
        assert end[0] == pytest.approx(2.0, abs=1e-12)
        assert end[1] == pytest.approx(1.0, abs=1e-12)

    def test_cosh_on_negative_half(self, p0):
        traj = ode_integrate(p0.system(4.0), [1.0, 0.0])
        assert traj([0.0])[0][0].real == pytest.approx(math.cosh(2.0), rel=1e-9)

    def test_half_tolerance_reintegration(self, p0):
        loose = Tolerances()
        tight = Tolerances(ode_rel=5e-11, ode_abs=5e-15)
        a, _ = fundamental_b_vectors(p0, 37.0, loose)
        b, _ = fundamental_b_vectors(p0, 37.0, tight)
        assert np.max(np.abs(a - b)) <= 10 * loose.ode_rel * max(1.0, np.max(np.abs(b)))


class TestHermEig:
    def test_swap_matrix(self):
        w, _ = herm_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(w, [-1, 1])

    def test_identity_and_diagonal(self):
        assert np.allclose(herm_eig(np.eye(3))[0], 1.0)
        assert np.allclose(herm_eig(np.diag([2.0, 5.0]))[0], [2, 5])

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            herm_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    @given(st.integers(2, 6), st.integers(0, 2 ** 31))
    def test_unitary_invariance_and_residual(self, n, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        H = A + A.conj().T
        U, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        w, V = herm_eig(H)
        w2, _ = herm_eig(U @ H @ U.conj().T)
        scale = np.linalg.norm(H)
        assert np.all(np.diff(w) >= 0)
        assert np.max(np.abs(w - w2)) <= 1e-10 * scale
        assert np.max(np.abs(H @ V - V * w)) <= 1e-10 * scale
