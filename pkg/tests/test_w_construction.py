import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinspec import w_construction as wc
from kreinspec.coefficients import CoefficientDescriptor, Piece, connection_witness

N_PANELS, ORDER = 64, 12


@pytest.fixture(scope="module")
def grid1(p1):
    return wc.construction_grid(p1, N_PANELS, ORDER)


@pytest.fixture(scope="module")
def grid0(p0):
    return wc.construction_grid(p0, N_PANELS, ORDER)


def test_profiles():
    u = np.linspace(-0.5, 1.5, 401)
    s = wc.smoothstep(u)
    assert s[0] == 0 and s[-1] == 1 and np.all(np.diff(s) >= 0)
    assert wc.transplant_cutoff(np.array([0.0, 0.25]))[1] == 1.0
    assert wc.transplant_cutoff(np.array([0.5, 0.9])).max() == 0.0
    assert np.all(wc.endpoint_profile(np.array([-0.5, 0.0, 0.5])) == 0)
    assert np.all(wc.endpoint_profile(np.array([-1.0, -0.75, 0.75, 1.0])) == 1)
    assert np.all(wc.centre_bump(np.array([-0.125, 0.0, 0.125])) == 1)
    assert np.all(wc.centre_bump(np.array([-0.3, 0.25, 0.9])) == 0)
    # C^2: the second difference quotient stays bounded across the knots
    h = 1e-4
    x = np.array([0.0, 1.0])
    d2 = (wc.smoothstep(x + h) - 2 * wc.smoothstep(x) + wc.smoothstep(x - h)) / h ** 2
    assert np.all(np.abs(d2) < 1e-2)


@pytest.fixture(scope="module")
def S(p0, grid0):
    conn = connection_witness(p0.p, p0.r, "0-", "0+", (1.0, 1.0))
    return wc.build_transplantation(grid0, p0, conn)


@pytest.fixture(scope="module")
def psi(p1):
    const = wc.positivity_constants(p1)
    return wc.build_psi(p1, const, wc.psi_grid(p1, const, N_PANELS, ORDER))


class TestTransplantation:
    def test_affine_transplant(self, S, grid0):
        f = 2.0 - 3.0 * grid0.nodes
        assert abs(wc.one_sided(grid0, S.op(f), 0.0, "right") - 2.0) < 1e-10

    def test_forward_and_adjoint_traces(self, p1, grid1):
        conn = wc._witness(p1, "AtMinus1")
        S = wc.build_transplantation(grid1, p1, conn)
        one = np.ones(grid1.size)
        assert abs(wc.traces(grid1, S.op(one))[0] - abs(conn.alpha_slope)) < 1e-10
        assert abs(wc.traces(grid1, S.op.adjoint()(one))[0] - abs(conn.beta_slope) * conn.rho0) < 1e-6

    def test_closed_forms(self, p1, grid1, rng):
        S = wc.build_transplantation(grid1, p1, wc._witness(p1, "AtMinus1"))
        f = lambda x: np.cos(3 * x) + 1j * x ** 2  # noqa: E731
        x = grid1.nodes
        assert np.max(np.abs(S.op(f(x)) - S.forward_closed_form(f, x))) < 1e-9
        assert np.max(np.abs(S.op.adjoint()(f(x)) - S.adjoint_closed_form(p1, f, x))) < 1e-9
        assert S.op.adjoint_residual(rng, 10) < 1e-12

    def test_vanishing_p_rejected(self, p1, grid1):
        p = CoefficientDescriptor((Piece((-1.0, 0.5), 1.0, 0.0, 0.0, (1.0,)),
                                   Piece((0.5, 1.0), 1.0, 0.0, 0.0, (0.0,))), "p")
        conn = wc._witness(p1, "AtPlus1")
        with pytest.raises(wc.InvalidConnection):
            wc.build_transplantation(grid1, p1.replace(p=p), conn)


class TestBlocks:
    def test_diagonal_coefficients_example(self):
        g1, g2 = wc.solve_diagonal_coefficients(2.0, 1.0, -1.0)
        assert (g1, g2) == (-2.0, 3.0)

    def test_degenerate_connection(self):
        with pytest.raises(wc.DegenerateConnection):
            wc.solve_diagonal_coefficients(1.0, 1.0, 0.5)

    @given(st.floats(0.1, 5), st.floats(0.1, 5), st.complex_numbers(max_magnitude=10))
    def test_diagonal_coefficient_equations(self, A, B, t):
        if abs(A - B) < 1e-3:
            return
        g1, g2 = wc.solve_diagonal_coefficients(A, B, t)
        assert abs(g1 * A + g2 - t) < 1e-9 * (1 + abs(t))
        assert abs(np.conj(g1) * B + np.conj(g2) - 1) < 1e-9 * (1 + abs(t))

    def test_case_A_example(self, p1, grid1, rng):
        _, c1, c2 = wc.mixed_layout(p1, "A")
        S1, S2 = wc.build_transplantation(grid1, p1, c1), wc.build_transplantation(grid1, p1, c2)
        X12, X21, ups = wc.build_offdiagonal_X("A", S1, S2, 0.0, 3.0)
        assert ups == pytest.approx(-1.0)
        assert not np.any(X12.matrix)
        expected = -3.0 * (S1.op.matrix - S2.op.matrix)
        assert np.allclose(X21.matrix, expected)
        f = wc.random_smooth(grid1, rng, ends=(0.7 - 0.2j, 1.3))
        assert abs(wc.traces(grid1, X21(f))[1] - 3.0 * (0.7 - 0.2j)) < 1e-8

    def test_case_C_traces(self, p1, grid1, rng):
        _, c1, c2 = wc.mixed_layout(p1, "C")
        S1, S2 = wc.build_transplantation(grid1, p1, c1), wc.build_transplantation(grid1, p1, c2)
        X12, X21, _ = wc.build_offdiagonal_X("C", S1, S2, 1.5 - 1j, -0.25 + 2j)
        tr = wc.offdiagonal_traces(grid1, X12, X21, 1.5 - 1j, -0.25 + 2j, rng)
        assert max(tr.values()) < 1e-6

    def test_degenerate_mixed(self, p1, grid1):
        _, c1, _ = wc.mixed_layout(p1, "A")
        S1 = wc.build_transplantation(grid1, p1, c1)
        with pytest.raises(wc.DegenerateMixedCondition):
            wc.build_offdiagonal_X("A", S1, S1, 1.0, 1.0)


class TestAssembly:
    def test_identity_target(self, p1, grid1):
        op, rep = wc.assemble_Ws1(p1, grid1, np.eye(2))
        assert rep.deviation < 1e-6
        assert op.positivity() >= 1 - 1e-6

    def test_delta_inverse_target(self, p0, grid0):
        target = p0.delta_info.delta_inv
        op, rep = wc.assemble_Ws1(p0, grid0, target)
        assert np.max(np.abs(rep.measured - [[0, 1], [1, 0]])) < 1e-6

    def test_certification_failure(self, p1, grid1, monkeypatch):
        monkeypatch.setattr(wc, "positivity_margin", lambda Y: 0.5)
        with pytest.raises(wc.CertificationFailure) as info:
            wc.assemble_Ws1(p1, grid1, np.eye(2))
        assert info.value.clause == "J0 W >= I"

    def test_positive_definite_route(self, p2, grid0):
        W = wc.build_W01(p2, grid0)
        assert W.route == "k2-positive"
        assert np.max(np.abs(W.boundary_action().measured - np.eye(2))) < 1e-6
        assert W.positivity() >= 1 - 1e-6

    def test_negative_definite_route(self, p2, grid0):
        neg = p2.replace(M=-p2.M)
        assert neg.delta_info.definiteness == "negative"
        W = wc.build_W01(neg, grid0)
        assert W.route == "k2-negative"
        assert np.max(np.abs(W.boundary_action().measured + np.eye(2))) < 1e-6

    def test_single_essential_row_route(self, p1, grid1, rng):
        W = wc.build_W01(p1, grid1)
        assert W.route == "k1-u"
        f = wc.random_smooth(grid1, rng, ends=(2.0 + 1j, -0.5))
        tm, tp = wc.traces(grid1, W.W(f))
        assert abs(tm) < 1e-6 and abs(tp + 0.5) < 1e-6

    def test_glued_operator_is_continuous(self, p0, grid0, rng):
        W = wc.build_W01(p0, grid0)
        assert wc.fmax_check(grid0, W.W(wc.random_smooth(grid0, rng)), p0).passed()

    def test_hypothesis_not_met(self, p0_amended):
        grid = wc.construction_grid(p0_amended, 16, 8)
        with pytest.raises(wc.HypothesisNotMet):
            wc.build_W01(p0_amended, grid)


class TestConstants:
    def test_p0_values(self, p0):
        c = wc.positivity_constants(p0)
        assert c.alpha == pytest.approx(0.2, abs=1e-15)
        assert c.kappa == pytest.approx(0.8, abs=1e-15)
        assert c.c == pytest.approx(1 / (10 * np.sqrt(2)), abs=1e-15)
        assert 1 - c.kappa == pytest.approx(c.alpha / c.delta2, abs=1e-15)
        assert c.tail_bound == pytest.approx(1 / 8, abs=1e-15)
        assert c.gamma == 15 / 16
        assert wc.tail_integral(p0.r, c.gamma) == pytest.approx(1 / 8, abs=1e-14)

    @given(st.floats(1e-3, 1e3), st.floats(1.0, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 10))
    def test_identity(self, d1, ratio, eta, rn):
        d2 = d1 * ratio
        alpha, _, kappa = wc.constants_from(d1, d2, eta, rn)
        assert abs(1 - kappa - alpha / d2) <= 1e-14


class TestCoupling:
    def test_profile_closed_form(self, psi, p1):
        x = psi.grid.nodes
        assert np.max(np.abs(psi.psi - 16 * np.maximum(0, np.abs(x) - 15 / 16))) < 1e-12
        assert np.allclose(psi.end_values(), [1, 0, 0, 1], atol=1e-12)
        assert psi.psi_norm2(p1) == pytest.approx(1 / 24, abs=1e-12)
        assert psi.psi_norm2(p1) <= psi.constants.tail_bound

    def test_kernel_hermitian(self, psi):
        assert psi.hermitian_residual() < 1e-12

    def test_wrong_case(self, p0):
        with pytest.raises(wc.WrongCase):
            wc.build_psi(p0, wc.positivity_constants(p0))

    def test_K_and_Z_trivial_inputs(self, psi, p1):
        K = wc.assemble_K(psi, p1)
        assert not np.any(K(np.zeros(psi.grid.size)))
        Z = wc.assemble_Z(psi, p1)
        assert not np.any(Z.Z @ np.zeros(2))
        assert np.array_equal(Z.Z @ np.array([1.0, 0.0]), psi.psi1)
        assert Z.passed

    def test_block_diagonal_degenerate(self, psi, p1):
        grid = psi.grid
        W01 = wc.build_W01(p1, grid)
        zeroK = wc.OperatorGrid(grid, np.zeros((grid.size, grid.size)), W01.W.mass)
        zeroZ = wc.ZPair(np.zeros((grid.size, 2)), np.zeros((2, grid.size)), 0.0, 1.0, 0.0)
        full = wc.assemble_W_full(W01, zeroK, zeroZ, psi, p1, n_tests=2)
        # the vector block is alpha Delta^{-1} = -alpha I, and J flips it to alpha I
        expected = min(W01.positivity(), psi.constants.alpha)
        assert full.min_eig == pytest.approx(expected, abs=1e-9)
