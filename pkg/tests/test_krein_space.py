import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinspec.krein_space import (GridMismatch, SpaceElement, apply_J, inner_hilbert,
                                   inner_krein)
from kreinspec.numerics import Grid

GRID = Grid.uniform(8, 8)


def elem(f=0.0, vec=(0, 0)):
    fn = f if callable(f) else (lambda x: f)
    return SpaceElement.from_callable(GRID, fn, vec)


def random_elem(rng):
    c = rng.normal(size=6) + 1j * rng.normal(size=6)
    return SpaceElement(GRID, np.polynomial.legendre.legval(GRID.nodes, c),
                        rng.normal(size=2) + 1j * rng.normal(size=2))


def test_krein_examples(p0):
    one = elem(1.0)
    assert abs(inner_krein(one, one, p0)) < 1e-14
    e1, e2 = elem(0.0, (1, 0)), elem(0.0, (0, 1))
    assert abs(inner_krein(e1, e1, p0)) < 1e-14
    assert inner_krein(e1, e2, p0) == pytest.approx(1.0)


def test_hilbert_examples(p0):
    assert inner_hilbert(elem(1.0), elem(1.0), p0).real == pytest.approx(2.0, abs=1e-13)
    assert inner_hilbert(elem(0.0, (1, 0)), elem(0.0, (1, 0)), p0).real == pytest.approx(1.0)
    x = elem(np.cos, (2, 3))
    assert inner_hilbert(x, SpaceElement.zero(GRID), p0) == 0


def test_J_examples(p0):
    Jx = apply_J(elem(1.0, (1, 0)), p0)
    assert np.allclose(Jx.fun, np.sign(GRID.nodes))
    assert np.allclose(Jx.vec, [0, 1])


def test_grid_mismatch(p0):
    other = SpaceElement.zero(Grid.uniform(4, 8))
    with pytest.raises(GridMismatch):
        inner_krein(elem(1.0), other, p0)


@given(st.integers(0, 2 ** 31), st.sampled_from(["example_p0", "example_p1", "example_p2"]))
def test_inner_product_properties(seed, name):
    from kreinspec.problem import shipped_problem
    prob = shipped_problem(name)
    rng = np.random.default_rng(seed)
    x, y = random_elem(rng), random_elem(rng)
    kxy, kyx = inner_krein(x, y, prob), inner_krein(y, x, prob)
    assert abs(kxy - np.conj(kyx)) < 1e-10 * (1 + abs(kxy))
    hxx, hyy = inner_hilbert(x, x, prob), inner_hilbert(y, y, prob)
    assert hxx.real > 0 and abs(hxx.imag) < 1e-12 * hxx.real
    assert abs(inner_hilbert(x, y, prob) - inner_krein(apply_J(x, prob), y, prob)) < 1e-10 * (1 + hxx.real)
    assert abs(kxy) ** 2 <= hxx.real * hyy.real * (1 + 1e-12)
    Jx, Jy = apply_J(x, prob), apply_J(y, prob)
    assert abs(inner_krein(Jx, Jy, prob) - kxy) < 1e-10 * (1 + abs(kxy))
    JJx = apply_J(Jx, prob)
    assert np.max(np.abs(JJx.stacked() - x.stacked())) < 1e-12 * np.max(np.abs(x.stacked()))
