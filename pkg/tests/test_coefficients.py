import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinspec.coefficients import (CONDITIONS, CoefficientDescriptor, Piece, SingularPoint,
                                    check_condition, connection_functions, connection_witness,
                                    detect_order, mixed_determinant, sgn_weight, structure_flags)
from kreinspec.problem import SHIPPED, shipped_problem

ONE = CoefficientDescriptor.constant(1.0, "p")


def tent_weight():
    """-1 on [-1, 0), 1 - x on [0, 1]."""
    return CoefficientDescriptor((Piece((-1.0, 0.0), -1.0, 0.0, 0.0, (1.0,)),
                                  Piece((0.0, 1.0), 1.0, 1.0, 1.0, (1.0,))), "r")


def test_evaluate_and_integrate():
    assert sgn_weight().evaluate(np.array([0.3]))[0] == 1.0
    assert tent_weight().evaluate(np.array([0.5]))[0] == pytest.approx(0.5)
    assert sgn_weight().absolute().integrate(-1, 1) == pytest.approx(2.0, abs=1e-12)


def test_singular_point():
    q = CoefficientDescriptor((Piece((-1.0, 1.0), 1.0, 0.0, -0.5, (1.0,)),), "q")
    with pytest.raises(SingularPoint):
        q.evaluate(np.array([0.0]))


def test_detect_order():
    assert detect_order(sgn_weight(), "0+") == 0.0
    assert detect_order(tent_weight(), "1-") == 1.0
    assert detect_order(tent_weight(), "-1+") == 0.0


def test_structure_flags():
    f = structure_flags(ONE, sgn_weight())
    assert f.even_p and f.odd_r
    g = structure_flags(ONE, CoefficientDescriptor.sign_weight(left=2.0))
    assert g.nearly_odd_r == (True, pytest.approx(2.0))
    assert not g.odd_r
    h = structure_flags(ONE, tent_weight())
    assert not h.odd_r and not h.nearly_odd_r[0]


def test_connection_witnesses():
    c = connection_witness(ONE, sgn_weight(), "0-", "0+", (1.0, 2.0))
    assert c.rho0 == 1.0
    c = connection_witness(ONE, tent_weight(), "-1+", "1-")
    assert c.rho0 == 0.0
    assert connection_witness(ONE, tent_weight(), "1-", "-1+") is None


@given(st.sampled_from(["-1+", "0-", "0+", "1-"]), st.floats(0.2, 5.0))
def test_self_connection_equal_slopes(point, s):
    r = CoefficientDescriptor((Piece((-1.0, 0.0), -1.0, 0.0, 0.5, (2.0, 1.0)),
                               Piece((0.0, 1.0), 1.0, 1.0, 1.5, (3.0,))), "r")
    assert connection_witness(ONE, r, point, point, (s, s)).rho0 == 1.0


@pytest.mark.parametrize("name,which,verdict", [
    ("example_p0", "Mixed", "Satisfied"),
    ("example_p0_amended", "Mixed", "Violated"),
    ("example_p0_amended", "AtPlus1", "Satisfied"),
    ("example_p0_amended", "At0", "Satisfied"),
    ("example_p0_amended", "AtMinus1", "Satisfied"),
])
def test_condition_verdicts(name, which, verdict):
    v = check_condition(shipped_problem(name), which)
    assert v.verdict == verdict
    if verdict == "Violated":
        assert v.tag == "affine-exhaustion"


@pytest.mark.parametrize("name", SHIPPED)
@pytest.mark.parametrize("which", CONDITIONS)
def test_witnesses_meet_definition(name, which):
    prob = shipped_problem(name)
    v = check_condition(prob, which)
    assert v.verdict == check_condition(prob, which).verdict  # deterministic
    for w in v.witnesses:
        rho, varpi = connection_functions(prob.p, prob.r, w)
        t = np.linspace(w.eps * 1e-6, w.eps, 200)
        pv = varpi(t)
        assert np.all(pv > 1 / w.tau) and np.all(pv < w.tau)
        assert abs(rho(t[:1])[0] - w.rho0) < 1e-5
    if which == "Mixed" and v.satisfied and len(v.witnesses) == 2:
        assert abs(mixed_determinant(v.case, *v.witnesses)) >= 1e-6
    if which in ("At0", "AtMinus1", "AtPlus1") and v.satisfied:
        w = v.witnesses[0]
        assert abs(abs(w.alpha_slope) - abs(w.beta_slope) * w.rho0) >= 1e-6


def test_even_odd_never_violated():
    for name in SHIPPED:
        prob = shipped_problem(name)
        fl = structure_flags(prob.p, prob.r)
        if fl.even_p and fl.odd_r and check_condition(prob, "AtPlus1").satisfied:
            assert check_condition(prob, "Mixed").verdict != "Violated"
