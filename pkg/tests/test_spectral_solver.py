import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinspec.problem import SHIPPED, shipped_problem
from kreinspec.spectral_solver import (ContourTooClose, InvalidInput, characteristic,
                                       characteristic_many, count_zeros_rect, derivatives,
                                       eigenfunction_initial_states, eigenfunctions,
                                       embed_function, find_real_eigenvalues, fundamental_b_vectors,
                                       in_form_domain, jordan_chain, lagrange_residual, multiplicity,
                                       root_chains, root_vector_embed, wronskian_residual)
from oracles import p0_characteristic, p0_real_roots


@pytest.fixture(scope="module")
def p0_roots_100():
    return p0_real_roots(-100, 100, 4000)


class TestFundamentalSystem:
    def test_b_vectors_at_zero(self, p0):
        B, _ = fundamental_b_vectors(p0, 0.0)
        assert np.allclose(B, [[1, 0], [1, 2], [0, 1], [0, 1]], atol=1e-12)

    def test_cosh_value(self, p0):
        _, traj = fundamental_b_vectors(p0, 4.0)
        assert abs(traj.fundamental([0.0])[0][0, 0] - math.cosh(2.0)) < 1e-8

    @pytest.mark.parametrize("name", SHIPPED)
    @pytest.mark.parametrize("lam", [0.0, -17.0, 45.5, 3 + 4j])
    def test_wronskian_constant(self, name, lam):
        assert wronskian_residual(shipped_problem(name), lam, np.linspace(-1, 1, 41)) < 1e-8


class TestCharacteristic:
    def test_zero_is_root(self, p0):
        assert abs(characteristic(p0, 0.0, with_derivative=False).D) < 1e-12

    def test_derivative_at_zero(self, p0):
        assert abs(derivatives(p0, 0.0)[0] - 2.0) < 1e-6

    def test_matches_oracle_at_one(self, p0):
        ref = complex(p0_characteristic(1.0))
        assert abs(characteristic(p0, 1.0, with_derivative=False).D - ref) <= 1e-8 * (1 + abs(ref))

    def test_complex_points_match_oracle(self, p0):
        lams = np.array([2 + 3j, -7 - 1j, 20 + 0.5j])
        D = characteristic_many(p0, lams)
        for lam, d in zip(lams, D):
            ref = complex(p0_characteristic(lam))
            assert abs(d - ref) <= 1e-8 * (1 + abs(ref))


class TestLagrange:
    def test_constant_and_linear(self, p0):
        assert abs(lagrange_residual(p0, [1.0], [0.0, 1.0])) < 1e-12

    def test_square_against_constant(self, p0):
        assert abs(lagrange_residual(p0, [0.0, 0.0, 1.0], [1.0])) < 1e-8

    @given(st.sampled_from(SHIPPED), st.integers(0, 2 ** 31))
    def test_random_polynomials(self, name, seed):
        rng = np.random.default_rng(seed)
        f = rng.normal(size=4) + 1j * rng.normal(size=4)
        g = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert abs(lagrange_residual(shipped_problem(name), f, g)) < 1e-8


class TestRealEigenvalues:
    def test_small_window_contains_zero(self, p0):
        roots = find_real_eigenvalues(p0, (-0.5, 0.5))
        assert any(abs(r.lam) < 1e-9 for r in roots)

    def test_positive_window_count(self, p0):
        ours = find_real_eigenvalues(p0, (1e-3, 100.0))
        assert len(ours) == len(p0_real_roots(1e-3, 100.0, 4000)) == 3

    def test_symmetric_window_matches_oracle(self, p0, p0_roots_100):
        ours = [r.lam for r in find_real_eigenvalues(p0, (-100.0, 100.0))]
        assert len(ours) == len(p0_roots_100)
        assert np.max(np.abs(np.array(ours) - np.array(p0_roots_100))) < 1e-7

    @pytest.mark.xfail(strict=True, reason="the closed-form determinant has 8 zeros in [-100, 100], "
                                            "so a count of at least 10 cannot be reached")
    def test_symmetric_window_has_ten_roots(self, p0):
        assert len(find_real_eigenvalues(p0, (-100.0, 100.0))) >= 10

    def test_refinement_stationarity(self, p0):
        for r in find_real_eigenvalues(p0, (-100.0, 100.0)):
            assert r.D_abs <= p0.tol.root_tol * max(1.0, abs(r.dD))

    def test_bad_window(self, p0):
        with pytest.raises(ValueError):
            find_real_eigenvalues(p0, (5.0, -5.0))


class TestArgumentPrinciple:
    def test_simple_zero_at_origin(self, p0):
        assert count_zeros_rect(p0, (-0.1, 0.1, -0.1, 0.1)) == 1

    def test_empty_rectangle(self, p0):
        assert count_zeros_rect(p0, (2.0, 3.0, -1.0, 1.0)) == 0

    def test_degenerate_rectangle_through_zero(self, p0):
        with pytest.raises(ContourTooClose):
            count_zeros_rect(p0, (-0.5, 0.5, 0.0, 0.0))

    def test_partition_sums_to_real_count(self, p0, p0_roots_100):
        edges = [-100.0, -40.0, -3.0, 3.0, 40.0, 100.0]
        total = sum(count_zeros_rect(p0, (a, b, -2.0, 2.0), 128) for a, b in zip(edges[:-1], edges[1:]))
        assert total == len(p0_roots_100)


class TestMultiplicity:
    def test_zero(self, p0):
        rep = multiplicity(p0, 0.0)
        assert rep.geometric == 1
        assert rep.algebraic_order == 1  # D = 2 lam + O(lam^2)
        assert rep.consistent

    def test_first_positive_root(self, p0, p0_roots_100):
        lam = min(r for r in p0_roots_100 if r > 0)
        rep = multiplicity(p0, lam)
        assert (rep.geometric, rep.algebraic_order, rep.algebraic_chain) == (1, 1, 1)


class TestChains:
    def test_chain_at_zero_stops(self, p0):
        # g'' = -sgn x with g'(1) = 1 and -g'(-1) = 1 has no solution
        assert jordan_chain(p0, 0.0, [1.0, 0.0]).length == 1

    def test_chain_at_first_positive_root(self, p0, p0_roots_100):
        lam = min(r for r in p0_roots_100 if r > 0)
        f0 = eigenfunction_initial_states(p0, lam)[:, 0]
        assert jordan_chain(p0, lam, f0).length == 1

    def test_scaling(self, p0):
        a = jordan_chain(p0, 0.0, [1.0, 0.0])
        b = jordan_chain(p0, 0.0, [5.0, 0.0])
        assert a.length == b.length
        assert np.allclose(b.bvecs[0], 5 * a.bvecs[0])

    def test_missing_eigenfunction(self, p0):
        with pytest.raises(InvalidInput):
            jordan_chain(p0, 0.0, None)


class TestEmbedding:
    def test_constant_eigenfunction(self, p0):
        grid = p0.grid(16, 8)
        (chain,) = root_chains(p0, 0.0)
        (x,) = root_vector_embed(chain, p0, grid)
        c = x.fun[0]
        assert np.allclose(x.fun / c, 1.0, atol=1e-8)
        assert np.allclose(x.vec / c, [1.0, 1.0], atol=1e-8)

    def test_p1_second_component(self, p1):
        roots = find_real_eigenvalues(p1, (-60.0, 60.0))
        lam = roots[len(roots) // 2].lam
        fn = eigenfunctions(p1, lam)[0]
        b = fn.boundary_vector()
        x = embed_function(p1, p1.grid(16, 8), fn)
        assert np.allclose(x.vec, [b[0], b[3]])
        assert in_form_domain(p1, x, b[0], b[1])

    def test_zero_function(self, p0):
        fn = eigenfunctions(p0, 0.0)[0].scaled(0.0)
        x = embed_function(p0, p0.grid(16, 8), fn)
        assert not np.any(x.fun) and not np.any(x.vec)
