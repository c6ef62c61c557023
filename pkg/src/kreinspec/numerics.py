"""Shared numerical kernels: quadrature, ODE propagation, Hermitian eigensolves, grids."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from ._kernels import BACKEND  # noqa: F401  (re-exported for reports)


class NumericsError(Exception):
    """Base class for failures in the numerical kernels."""


class NonIntegrable(NumericsError):
    """A weight exponent at or below -1 was supplied."""


class EvaluationError(NumericsError):
    """An integrand produced NaN or inf."""


class StiffnessError(NumericsError):
    """Adaptive step size fell below the minimum."""


class NotHermitian(NumericsError):
    """Matrix handed to ``herm_eig`` is not Hermitian within tolerance."""


@dataclass(frozen=True)
class Tolerances:
    ode_rel: float = 1e-10
    ode_abs: float = 1e-14
    quad_tol: float = 1e-10
    root_tol: float = 1e-9
    eig_tol: float = 1e-10

    def __post_init__(self):
        for name in ("ode_rel", "ode_abs", "quad_tol", "root_tol", "eig_tol"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"tolerance {name} must be positive, got {val!r}")
        if self.root_tol < 1e2 * np.finfo(float).eps:
            raise ValueError("root_tol must be at least 100 machine epsilons")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("ode_rel", "ode_abs", "quad_tol", "root_tol", "eig_tol")}


DEFAULT_TOL = Tolerances()


def thread_count() -> int:
    """Worker count, capped by ``KREINSPEC_THREADS`` (default: CPU count, max 8)."""
    env = os.environ.get("KREINSPEC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


# ---------------------------------------------------------------------------
# grids

def _bary_weights(x: np.ndarray) -> np.ndarray:
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    return 1.0 / d.prod(axis=1)


class Grid:
    """Composite Gauss-Legendre grid on [-1, 1].

    Panel boundaries always contain -1, -1/2, 0, 1/2, 1; quadrature nodes are
    strictly interior to panels so no node ever sits on a panel boundary.
    """

    MANDATORY = (-1.0, -0.5, 0.0, 0.5, 1.0)

    def __init__(self, breaks: Sequence[float], order: int = 16):
        b = np.unique(np.concatenate([np.asarray(breaks, float), self.MANDATORY]))
        b = b[(b >= -1.0) & (b <= 1.0)]
        if b[0] != -1.0 or b[-1] != 1.0:
            raise ValueError("grid must span [-1, 1]")
        self.breaks = b
        self.order = int(order)
        t, w = np.polynomial.legendre.leggauss(self.order)
        self._ref_nodes = t
        self._bary = _bary_weights(t)
        lo, hi = b[:-1], b[1:]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        self.nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        self.weights = (half[:, None] * w[None, :]).ravel()
        self.n_panels = lo.size
        self.panel_of_node = np.repeat(np.arange(self.n_panels), self.order)

    @classmethod
    def uniform(cls, n_panels: int = 128, order: int = 16, extra: Sequence[float] = ()) -> "Grid":
        pts = np.linspace(-1.0, 1.0, n_panels + 1)
        return cls(np.concatenate([pts, np.asarray(extra, float)]), order)

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values: np.ndarray) -> complex:
        return np.dot(self.weights, values)

    def refined(self) -> "Grid":
        mids = 0.5 * (self.breaks[1:] + self.breaks[:-1])
        return Grid(np.concatenate([self.breaks, mids]), self.order)

    def _locate(self, points: np.ndarray, side: str) -> np.ndarray:
        if side == "left":
            k = np.searchsorted(self.breaks, points, side="left") - 1
        else:
            k = np.searchsorted(self.breaks, points, side="right") - 1
        return np.clip(k, 0, self.n_panels - 1)

    def interp_matrix(self, points, side: str = "right") -> np.ndarray:
        """Rows interpolate node values to ``points`` with the local panel polynomial.

        ``side`` picks the panel for points sitting on a boundary; points at
        +-1 always use the end panel (this is how traces are extrapolated).
        """
        pts = np.atleast_1d(np.asarray(points, float))
        k = self._locate(pts, side)
        lo, hi = self.breaks[k], self.breaks[k + 1]
        s = (2.0 * pts - (lo + hi)) / (hi - lo)
        out = np.zeros((pts.size, self.size))
        diff = s[:, None] - self._ref_nodes[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = self._bary[None, :] / diff
            rows = terms / terms.sum(axis=1, keepdims=True)
        hit = exact.any(axis=1)
        rows[hit] = exact[hit].astype(float)
        cols = k[:, None] * self.order + np.arange(self.order)[None, :]
        np.put_along_axis(out, cols, rows, axis=1)
        return out

    def evaluate(self, values: np.ndarray, points, side: str = "right") -> np.ndarray:
        return self.interp_matrix(points, side) @ values

    def _reference_ops(self) -> tuple[np.ndarray, np.ndarray]:
        leg = np.polynomial.legendre
        t = self._ref_nodes
        vinv = np.linalg.inv(leg.legvander(t, self.order - 1))
        eye = np.eye(self.order)
        integ = np.stack([leg.legval(t, leg.legint(eye[m], lbnd=-1.0)) for m in range(self.order)], axis=1)
        deriv = np.stack([leg.legval(t, leg.legder(eye[m])) for m in range(self.order)], axis=1)
        return integ @ vinv, deriv @ vinv

    def cumulative_matrix(self) -> np.ndarray:
        """Rows give int_{-1}^{x_i} of the panel-wise interpolant."""
        integ, _ = self._reference_ops()
        n, k = self.size, self.order
        out = np.zeros((n, n))
        half = 0.5 * np.diff(self.breaks)
        for p in range(self.n_panels):
            rows = slice(p * k, (p + 1) * k)
            out[rows, : p * k] = self.weights[None, : p * k]
            out[rows, rows] = half[p] * integ
        return out

    def derivative_matrix(self) -> np.ndarray:
        """Block-diagonal spectral differentiation (panel by panel)."""
        _, deriv = self._reference_ops()
        n, k = self.size, self.order
        out = np.zeros((n, n))
        half = 0.5 * np.diff(self.breaks)
        for p in range(self.n_panels):
            rows = slice(p * k, (p + 1) * k)
            out[rows, rows] = deriv / half[p]
        return out

    def mirror_index(self) -> np.ndarray:
        """Index of the node at -x_i; raises ValueError for a non-symmetric grid."""
        if not np.allclose(self.nodes[::-1], -self.nodes, atol=1e-14, rtol=0.0):
            raise ValueError("grid is not symmetric about 0")
        return np.arange(self.size)[::-1].copy()

    def jumps(self, values: np.ndarray) -> np.ndarray:
        """Left/right limit differences at the interior panel boundaries."""
        inner = self.breaks[1:-1]
        return self.interp_matrix(inner, "right") @ values - self.interp_matrix(inner, "left") @ values


# ---------------------------------------------------------------------------
# quadrature

class QuadResult(NamedTuple):
    value: complex
    error: float


def _singular_anchors(weight, a: float, b: float):
    """(point, exponent) pairs where the weight is not smooth inside [a, b]."""
    out = []
    if weight is None:
        return out
    for piece in weight.pieces:
        nu = piece.exponent
        if nu <= -1.0:
            raise NonIntegrable(f"exponent {nu} at anchor {piece.anchor} is not integrable")
        if nu == 0.0 or (nu > 0 and float(nu).is_integer()):
            continue
        c = piece.anchor
        lo, hi = piece.interval
        if lo <= c <= hi and a <= c <= b:
            out.append((c, nu))
    return out


def _graded_panels(a: float, b: float, sing_a: float | None, sing_b: float | None,
                   tol: float, ratio: float = 0.15, extra_levels: int = 0):
    """Panels on [a, b] graded geometrically toward singular ends."""
    if sing_a is not None and sing_b is not None:
        m = 0.5 * (a + b)
        return (_graded_panels(a, m, sing_a, None, tol, ratio, extra_levels)
                + _graded_panels(m, b, None, sing_b, tol, ratio, extra_levels))
    if sing_a is None and sing_b is None:
        return [(a, b)]
    nu = sing_a if sing_a is not None else sing_b
    length = b - a
    levels = int(math.ceil(math.log(max(tol, 1e-300) * 1e-2) / ((nu + 1.0) * math.log(ratio)))) + 2
    levels = max(levels, 4) + extra_levels
    pts = [length * ratio ** k for k in range(levels, -1, -1)]
    if sing_a is not None:
        edges = sorted({a, b} | {a + d for d in pts})
    else:
        edges = sorted({a, b} | {b - d for d in pts})
    return list(zip(edges[:-1], edges[1:]))


def _quad_on(integrand, weight, panels, order):
    t, w = np.polynomial.legendre.leggauss(order)
    lo = np.array([p[0] for p in panels])
    hi = np.array([p[1] for p in panels])
    x = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * t[None, :]
    ww = (0.5 * (hi - lo))[:, None] * w[None, :]
    x = x.ravel()
    vals = np.asarray(integrand(x))
    if weight is not None:
        vals = vals * weight.evaluate(x)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("integrand is not finite at some quadrature node")
    return np.dot(ww.ravel(), vals)


def quad_weighted(integrand, weight=None, interval=(-1.0, 1.0), tol: float = DEFAULT_TOL.quad_tol,
                  grid: Grid | None = None) -> QuadResult:
    """Integral of ``integrand * weight`` over ``interval``.

    ``integrand`` is a vectorised callable, or an array of samples on ``grid``.
    ``weight`` is a coefficient descriptor (anything with ``pieces`` and a
    vectorised ``evaluate``) or None for the unit weight.  Power-law anchors
    get geometrically graded panels.
    """
    a, b = map(float, interval)
    if not (-1.0 <= a <= b <= 1.0):
        raise ValueError(f"interval {interval!r} is not inside [-1, 1]")
    if b == a:
        return QuadResult(0.0, 0.0)
    if grid is not None:
        vals = np.asarray(integrand)
        if vals.shape != grid.nodes.shape:
            raise ValueError("sampled integrand does not match the grid")
        if not (np.isclose(grid.breaks, a).any() and np.isclose(grid.breaks, b).any()):
            raise ValueError("interval ends must be grid panel boundaries")
        if weight is not None:
            _singular_anchors(weight, a, b)
            vals = vals * weight.evaluate(grid.nodes)
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("sampled integrand is not finite")
        mask = (grid.nodes > a) & (grid.nodes < b)
        coarse = grid.weights[mask] @ vals[mask]
        return QuadResult(coarse, float("nan"))

    sing = _singular_anchors(weight, a, b)
    edges = {a, b}
    if weight is not None:
        for piece in weight.pieces:
            for e in piece.interval:
                if a < e < b:
                    edges.add(e)
    for c, _ in sing:
        edges.add(c)
    edges = sorted(edges)
    sing_map = dict(sing)

    def build(extra):
        panels = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            panels += _graded_panels(lo, hi, sing_map.get(lo), sing_map.get(hi), tol,
                                     extra_levels=extra)
        return panels

    fn = integrand if callable(integrand) else (lambda x: np.full_like(x, float(integrand)))
    v1 = _quad_on(fn, weight, build(0), 20)
    v2 = _quad_on(fn, weight, build(4), 30)
    err = abs(v2 - v1)
    val = v2
    if np.isrealobj(val) or abs(np.imag(val)) == 0:
        val = float(np.real(val))
    return QuadResult(val, float(err))


# ---------------------------------------------------------------------------
# ODE propagation

@dataclass(frozen=True)
class LinearSystem:
    """Linear ODE in (f, pf') variables, optionally chained to depth ``depth``.

    ``P``, ``Q``, ``R`` are packed coefficient tuples (see coefficients.pack)
    and ``breaks`` the step boundaries (coefficient breakpoints).
    """

    P: tuple
    Q: tuple
    R: tuple
    lam: complex
    breaks: np.ndarray
    depth: int = 0

    @property
    def dim(self) -> int:
        return 2 * (self.depth + 1)

    def with_lambda(self, lam: complex) -> "LinearSystem":
        return LinearSystem(self.P, self.Q, self.R, complex(lam), self.breaks, self.depth)


def _h_init(lam: complex, h_max: float = 0.25) -> float:
    return min(h_max, 2.0 / (1.0 + math.sqrt(abs(lam))))


@dataclass
class Trajectory:
    """Dense trajectory: fundamental matrix records plus the initial data."""

    system: LinearSystem
    rec_x: np.ndarray
    rec_Y: np.ndarray
    initial: np.ndarray
    span: tuple

    def fundamental(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, float))
        a, b = self.span
        if np.any(xs < a - 1e-14) or np.any(xs > b + 1e-14):
            raise ValueError("query outside the integration span")
        out = np.empty((xs.size, self.system.dim, self.system.dim), complex)
        s = self.system
        for i, xv in enumerate(xs):
            k = max(0, int(np.searchsorted(self.rec_x, xv, side="right")) - 1)
            k = min(k, self.rec_x.size - 1)
            h = xv - self.rec_x[k]
            if h <= 0.0:
                out[i] = self.rec_Y[k]
            else:
                step = _kernels.gl_step(self.rec_x[k], h, s.lam, s.depth, s.P, s.Q, s.R,
                                        _kernels.GL_C, _kernels.GL_A, _kernels.GL_B)
                out[i] = step @ self.rec_Y[k]
        return out

    def __call__(self, x) -> np.ndarray:
        """States at x: shape (len(x), dim) or (len(x), dim, k) for matrix data."""
        Y = self.fundamental(x)
        return Y @ self.initial


def ode_integrate(system: LinearSystem, initial=None, span=(-1.0, 1.0),
                  tol: Tolerances = DEFAULT_TOL) -> Trajectory:
    """Propagate ``system`` over ``span`` and keep dense output.

    ``initial`` is a state vector, a matrix of column states, or None for the
    identity (fundamental matrix).
    """
    x0, x1 = map(float, span)
    if not x1 > x0:
        raise ValueError("span must be increasing")
    n = system.dim
    init = np.eye(n, dtype=complex) if initial is None else np.asarray(initial, complex)
    if init.shape[0] != n:
        raise ValueError(f"initial data must have leading dimension {n}")
    cap = 4096
    while True:
        rec_x = np.empty(cap)
        rec_Y = np.empty((cap, n, n), complex)
        _, nrec, status = _kernels.propagate(
            x0, x1, complex(system.lam), system.depth, system.P, system.Q, system.R,
            np.asarray(system.breaks, float), tol.ode_rel, tol.ode_abs,
            _h_init(system.lam), 1e-13, _kernels.GL_C, _kernels.GL_A, _kernels.GL_B,
            rec_x, rec_Y)
        if status == _kernels.STATUS_BUFFER_FULL:
            cap *= 4
            continue
        if status == _kernels.STATUS_UNDERFLOW:
            raise StiffnessError(f"step size underflow for lambda={system.lam}")
        break
    return Trajectory(system, rec_x[:nrec].copy(), rec_Y[:nrec].copy(), init, (x0, x1))


def transfer_matrices(system: LinearSystem, lams, span=(-1.0, 1.0),
                      tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Fundamental matrices at span[1] for many lambda values (threaded batches)."""
    lams = np.atleast_1d(np.asarray(lams, complex))
    n = system.dim
    out = np.empty((lams.size, n, n), complex)
    status = np.zeros(lams.size, np.int64)
    x0, x1 = map(float, span)
    breaks = np.asarray(system.breaks, float)
    h0 = _h_init(np.max(np.abs(lams)) if lams.size else 0.0)

    def run(sl):
        _kernels.propagate_many(lams[sl], x0, x1, system.depth, system.P, system.Q, system.R,
                                breaks, tol.ode_rel, tol.ode_abs, h0, 1e-13,
                                _kernels.GL_C, _kernels.GL_A, _kernels.GL_B,
                                out[sl], status[sl])

    workers = thread_count() if _kernels.HAVE_NUMBA else 1
    if workers == 1 or lams.size < 8:
        run(slice(0, lams.size))
    else:
        bounds = np.linspace(0, lams.size, min(workers * 4, lams.size) + 1).astype(int)
        slices = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, slices))
    if np.any(status == _kernels.STATUS_UNDERFLOW):
        bad = lams[status == _kernels.STATUS_UNDERFLOW][0]
        raise StiffnessError(f"step size underflow for lambda={bad}")
    return out


# ---------------------------------------------------------------------------
# Hermitian eigensolves

def herm_eig(H, tol: float = DEFAULT_TOL.eig_tol, B=None):
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    With ``B`` (Hermitian positive definite) solves the generalized problem
    H v = mu B v, eigenvectors B-orthonormal.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > tol * max(scale, 1e-300):
        raise NotHermitian(f"asymmetry {np.linalg.norm(H - H.conj().T):.3e} exceeds tolerance")
    Hs = 0.5 * (H + H.conj().T)
    if B is None:
        w, V = scipy.linalg.eigh(Hs)
    else:
        B = np.asarray(B)
        w, V = scipy.linalg.eigh(Hs, 0.5 * (B + B.conj().T))
    return w, V
