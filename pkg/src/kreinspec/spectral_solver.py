"""Shooting solver for -(p f')' + q f = lam r f with  M b(f) = lam N b(f).

The characteristic function is D(lam) = det (M - lam N) B(lam), where the
columns of B are the boundary vectors of the solutions with initial data
(f, pf')(-1) = (1, 0) and (0, 1).  Eigenvalues are the zeros of D.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize

from .boundary_algebra import Q, form_domain_predicate
from .krein_space import SpaceElement
from .numerics import (DEFAULT_TOL, Grid, Tolerances, ode_integrate, quad_weighted,
                       transfer_matrices)


class SpectralError(Exception):
    """Base class for spectral solver failures."""


class RefineRequested(SpectralError):
    """Two sign changes fell in adjacent scan cells; rescan with more points."""


class ContourTooClose(SpectralError):
    """|D| is numerically zero somewhere on the contour."""


class Indeterminate(SpectralError):
    """The numerical rank of C(lam) cannot be decided."""


class InvalidInput(SpectralError):
    """Missing or inconsistent eigenfunction data."""


# ---------------------------------------------------------------------------
# characteristic function

def _b_matrix(Phi: np.ndarray) -> np.ndarray:
    """Fundamental boundary vectors from the transfer matrix over [-1, 1].

    ``Phi`` may be a stack (..., 2, 2); returns (..., 4, 2).
    """
    Phi = np.asarray(Phi)
    B = np.zeros(Phi.shape[:-2] + (4, 2), complex)
    B[..., 0, 0] = 1.0
    B[..., 2, 1] = 1.0
    B[..., 1, :] = Phi[..., 0, :]
    B[..., 3, :] = Phi[..., 1, :]
    return B


def fundamental_b_vectors(problem, lam: complex, tol: Optional[Tolerances] = None):
    """(B(lam), trajectory) where ``trajectory(x)`` returns the 2x2 fundamental matrix."""
    tol = tol or problem.tol
    traj = ode_integrate(problem.system(lam), None, (-1.0, 1.0), tol)
    Phi = traj.fundamental([1.0])[0]
    return _b_matrix(Phi), traj


def wronskian_residual(problem, lam: complex, xs, tol: Optional[Tolerances] = None) -> float:
    """max |det Phi(x) - 1| over ``xs``."""
    _, traj = fundamental_b_vectors(problem, lam, tol)
    Y = traj.fundamental(xs)
    return float(np.max(np.abs(np.linalg.det(Y) - 1.0)))


_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def _det_from_transfer(L: np.ndarray, Phi: np.ndarray) -> np.ndarray:
    """det(L B) expanded by Cauchy-Binet over 2x2 minors of L and B.

    The minors of B are Phi01, 1, Phi11, Phi00, det Phi, -Phi10, and det Phi = 1
    (the system matrix is trace free).  Using the identity instead of the
    computed product keeps D linear in Phi and avoids the cancellation of the
    exponentially large terms that the naive determinant suffers.
    """
    one = np.ones(Phi.shape[:-2])
    minors_B = (Phi[..., 0, 1], one, Phi[..., 1, 1], Phi[..., 0, 0], one, -Phi[..., 1, 0])
    D = 0.0
    for (i, j), mb in zip(_PAIRS, minors_B):
        D = D + (L[..., 0, i] * L[..., 1, j] - L[..., 0, j] * L[..., 1, i]) * mb
    return D


def characteristic_many(problem, lams, tol: Optional[Tolerances] = None) -> np.ndarray:
    """D at each lambda (vectorised; the hot loop of every scan)."""
    tol = tol or problem.tol
    lams = np.atleast_1d(np.asarray(lams, complex))
    Phi = transfer_matrices(problem.system(), lams, (-1.0, 1.0), tol)
    L = problem.M[None] - lams[:, None, None] * problem.N[None]
    return _det_from_transfer(L, Phi)


def _cauchy_radius(lam: complex) -> float:
    return 0.05 * (1.0 + math.sqrt(abs(lam)))


def derivatives(problem, lam: complex, orders=(1,), n: int = 16, radius: Optional[float] = None,
                tol: Optional[Tolerances] = None) -> list[complex]:
    """Taylor derivatives of D at ``lam`` by the trapezoid rule on a circle."""
    rho = radius or _cauchy_radius(lam)
    theta = 2 * np.pi * np.arange(n) / n
    z = lam + rho * np.exp(1j * theta)
    vals = characteristic_many(problem, z, tol)
    out = []
    for k in orders:
        coef = np.mean(vals * np.exp(-1j * k * theta)) / rho ** k
        out.append(complex(coef * math.factorial(k)))
    return out


@dataclass(frozen=True)
class CharacteristicValue:
    lam: complex
    B: np.ndarray
    C: np.ndarray
    D: complex
    dD: complex


def characteristic(problem, lam: complex, tol: Optional[Tolerances] = None,
                   with_derivative: bool = True) -> CharacteristicValue:
    B, _ = fundamental_b_vectors(problem, lam, tol)
    L = problem.M - lam * problem.N
    C = L @ B
    Phi = np.array([[B[1, 0], B[1, 1]], [B[3, 0], B[3, 1]]])
    D = complex(_det_from_transfer(L, Phi))
    dD = derivatives(problem, lam, tol=tol)[0] if with_derivative else complex("nan")
    return CharacteristicValue(complex(lam), B, C, D, dD)


# ---------------------------------------------------------------------------
# Lagrange identity

def _as_poly(f) -> np.polynomial.Polynomial:
    if isinstance(f, np.polynomial.Polynomial):
        return f
    return np.polynomial.Polynomial(np.atleast_1d(np.asarray(f, complex)))


def boundary_vector_poly(problem, f) -> np.ndarray:
    f = _as_poly(f)
    df = f.deriv()
    p = problem.p
    pl = p.evaluate(np.array([-1.0]))[0]
    pr = p.evaluate(np.array([1.0]))[0]
    return np.array([f(-1.0), f(1.0), pl * df(-1.0), pr * df(1.0)], complex)


def _ell_times_r(problem, f) -> Callable:
    """x -> -(p f')' + q f, i.e. r times the differential expression."""
    f = _as_poly(f)
    df, d2f = f.deriv(), f.deriv(2)

    def fn(x):
        return -(problem.p.derivative(x) * df(x) + problem.p.evaluate(x) * d2f(x)) + problem.q.evaluate(x) * f(x)
    return fn


def lagrange_residual(problem, f, g, tol: Optional[Tolerances] = None) -> complex:
    """int (l f conj g - f conj l g) r  minus  i b(g)^* Q b(f), for polynomials f, g.

    ``f``, ``g`` are numpy Polynomials or coefficient arrays (ascending).
    """
    tol = tol or problem.tol
    f, g = _as_poly(f), _as_poly(g)
    lf, lg = _ell_times_r(problem, f), _ell_times_r(problem, g)

    def integrand(x):
        return lf(x) * np.conj(g(x)) - f(x) * np.conj(lg(x))

    lhs = 0.0
    br = problem.breaks
    for a, b in zip(br[:-1], br[1:]):
        lhs += quad_weighted(integrand, None, (a, b), tol.quad_tol).value
    bf, bg = boundary_vector_poly(problem, f), boundary_vector_poly(problem, g)
    rhs = 1j * (np.conj(bg) @ Q @ bf)
    return complex(lhs - rhs)


# ---------------------------------------------------------------------------
# real eigenvalues

@dataclass(frozen=True)
class RealEigenvalue:
    lam: float
    D_abs: float
    dD: complex
    kind: str  # simple | even

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "abs_D": self.D_abs, "dD_re": self.dD.real,
                "dD_im": self.dD.imag, "kind": self.kind}


def _to_s(lam: float) -> float:
    return math.copysign(math.sqrt(abs(lam)), lam)


def _from_s(s):
    return np.sign(s) * np.asarray(s) ** 2


def scan_points(window: tuple[float, float], density: float = 400.0, minimum: int = 64) -> np.ndarray:
    """Scan abscissae uniform in sgn(lam) sqrt|lam|."""
    a, b = map(float, window)
    sa, sb = _to_s(a), _to_s(b)
    n = max(minimum, int(math.ceil(density * (sb - sa)))) + 1
    s = np.linspace(sa, sb, n)
    lam = _from_s(s)
    lam[0], lam[-1] = a, b
    return lam


def _real_phase(D: np.ndarray) -> complex:
    k = int(np.argmax(np.abs(D)))
    if abs(D[k]) == 0:
        return 1.0
    return np.conj(D[k]) / abs(D[k])


def find_real_eigenvalues(problem, window: tuple[float, float], scan_points_n: Optional[int] = None,
                          tol: Optional[Tolerances] = None, density: float = 400.0) -> list[RealEigenvalue]:
    """Ascending refined real zeros of D in ``window``.

    The scan is uniform in sgn(lam) sqrt|lam| with ``density`` points per unit
    (or ``scan_points_n`` points in total).  Sign changes of the real-rotated D
    are refined by Brent's method; local minima of |D| without a sign change
    are probed for even-order zeros.
    """
    tol = tol or problem.tol
    a, b = map(float, window)
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise ValueError(f"window {window!r} must be finite and increasing")
    if scan_points_n:
        s = np.linspace(_to_s(a), _to_s(b), int(scan_points_n))
        lams = _from_s(s)
        lams[0], lams[-1] = a, b
    else:
        lams = scan_points((a, b), density)
    D = characteristic_many(problem, lams, tol)
    phase = _real_phase(D)
    Dr = (D * phase).real

    # refinement runs the propagator two digits tighter than the scan
    fine = dataclasses.replace(tol, ode_rel=min(tol.ode_rel, 1e-12), ode_abs=min(tol.ode_abs, 1e-16))

    def real_D(x: float) -> float:
        return float((characteristic_many(problem, [x], fine)[0] * phase).real)

    # samples that are zero to rounding relative to their neighbours
    absD = np.abs(D)
    neigh = np.maximum(np.concatenate([absD[1:], [0.0]]), np.concatenate([[0.0], absD[:-1]]))
    zero_hit = absD <= 1e3 * np.finfo(float).eps * neigh
    sgn = np.sign(Dr)
    cells = []
    for i in range(lams.size - 1):
        if zero_hit[i] or zero_hit[i + 1]:
            continue
        if sgn[i] * sgn[i + 1] < 0:
            cells.append(i)
    for i, j in zip(cells[:-1], cells[1:]):
        if j - i < 2:
            raise RefineRequested(f"sign changes at lambda~{lams[i]:.6g} and {lams[j]:.6g} are "
                                  "closer than two scan cells")
    roots: list[tuple[float, str]] = []
    for i in cells:
        x = scipy.optimize.brentq(real_D, lams[i], lams[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps,
                                  maxiter=200)
        roots.append((x, "simple"))
    for i in np.flatnonzero(zero_hit):
        roots.append((float(lams[i]), "simple"))
    # even-order candidates: interior local minima of |D| without sign change
    absD = np.abs(Dr)
    for i in range(1, lams.size - 1):
        if zero_hit[i] or i in cells or (i - 1) in cells:
            continue
        if absD[i] < absD[i - 1] and absD[i] < absD[i + 1] and absD[i] < 0.05 * min(absD[i - 1], absD[i + 1]):
            res = scipy.optimize.minimize_scalar(lambda x: abs(real_D(x)), bounds=(lams[i - 1], lams[i + 1]),
                                                 method="bounded", options={"xatol": 1e-13})
            d1, d2 = derivatives(problem, res.x, (1, 2), tol=fine)
            if abs(res.fun) <= math.sqrt(tol.root_tol) * max(1.0, abs(d2)) and abs(d1) <= math.sqrt(tol.root_tol) * max(1.0, abs(d2)):
                roots.append((float(res.x), "even"))
    roots.sort()
    out = []
    for x, kind in roots:
        if not (a <= x <= b):
            continue
        Dx = characteristic_many(problem, [x], fine)[0]
        dD = derivatives(problem, x, (1,), tol=fine)[0]
        out.append(RealEigenvalue(float(x), float(abs(Dx)), dD, kind))
    return out


# ---------------------------------------------------------------------------
# argument principle

def _winding(problem, path: Callable[[np.ndarray], np.ndarray], n0: int, tol: Tolerances,
             max_points: int = 400_000) -> tuple[int, float, np.ndarray]:
    """Winding number of D along the closed path t in [0, 1) -> path(t)."""
    t = np.linspace(0.0, 1.0, n0, endpoint=False)
    D = characteristic_many(problem, path(t), tol)
    while True:
        thr = tol.root_tol * max(1.0, float(np.median(np.abs(D))))
        if np.min(np.abs(D)) < thr:
            k = int(np.argmin(np.abs(D)))
            raise ContourTooClose(f"|D| = {abs(D[k]):.3e} at lambda = {complex(path(t[k:k+1])[0]):.6g}")
        Dn = np.roll(D, -1)
        jumps = np.angle(Dn / D)
        bad = np.flatnonzero(np.abs(jumps) > np.pi / 4)
        if bad.size == 0:
            break
        if t.size + bad.size > max_points:
            raise ContourTooClose("contour sampling budget exhausted; D varies too fast")
        tn = np.roll(t, -1)
        tn[-1] = 1.0
        mids = 0.5 * (t[bad] + tn[bad])
        Dm = characteristic_many(problem, path(mids), tol)
        t = np.concatenate([t, mids])
        D = np.concatenate([D, Dm])
        order = np.argsort(t)
        t, D = t[order], D[order]
    raw = float(np.sum(jumps) / (2 * np.pi))
    return int(round(raw)), raw, D


def _rect_path(rect):
    x0, x1, y0, y1 = map(float, rect)
    corners = np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1])

    def path(t):
        t = np.asarray(t) * 4.0
        k = np.minimum(np.floor(t).astype(int), 3)
        frac = t - k
        return corners[k] + frac * (corners[(k + 1) % 4] - corners[k])
    return path


def count_zeros_rect(problem, rect, points_per_side: int = 64, tol: Optional[Tolerances] = None) -> int:
    """Zeros of D (with multiplicity) inside rect = (re_lo, re_hi, im_lo, im_hi)."""
    tol = tol or problem.tol
    x0, x1, y0, y1 = map(float, rect)
    if x1 <= x0 or y1 <= y0:
        # a degenerate rectangle is a segment; any zero on it is "on the contour"
        def point(s):
            return x0 + s * (x1 - x0) + 1j * (y0 + s * (y1 - y0))

        seg = np.linspace(0.0, 1.0, 4 * points_per_side)
        D = characteristic_many(problem, point(seg), tol)
        thr = tol.root_tol * max(1.0, float(np.median(np.abs(D))))
        # a zero may sit between samples: polish the smallest |D| locally
        k = int(np.argmin(np.abs(D)))
        lo, hi = seg[max(k - 1, 0)], seg[min(k + 1, seg.size - 1)]
        best = scipy.optimize.minimize_scalar(
            lambda s: abs(characteristic_many(problem, [point(s)], tol)[0]) ** 2,
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        if min(float(np.min(np.abs(D))), math.sqrt(best.fun)) < thr:
            raise ContourTooClose("degenerate rectangle passes through a zero of D")
        return 0
    n, raw, _ = _winding(problem, _rect_path(rect), 4 * points_per_side, tol)
    if abs(raw - n) > 0.25:
        raise ContourTooClose(f"contour integral {raw:.3f} is not close to an integer")
    return n


def count_zeros_circle(problem, center: complex, radius: float, n0: int = 64,
                       tol: Optional[Tolerances] = None) -> int:
    tol = tol or problem.tol

    def path(t):
        return center + radius * np.exp(2j * np.pi * np.asarray(t))
    return _winding(problem, path, n0, tol)[0]


def _split_aspect(rect, max_aspect: float = 4.0):
    x0, x1, y0, y1 = rect
    w, h = x1 - x0, y1 - y0
    nx = max(1, int(math.ceil(w / (max_aspect * h)))) if w > max_aspect * h else 1
    ny = max(1, int(math.ceil(h / (max_aspect * w)))) if h > max_aspect * w else 1
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    return xs, ys


def count_zeros_region(problem, rect, points_per_side: int = 64, tol: Optional[Tolerances] = None,
                       max_aspect: float = 4.0, retries: int = 6) -> int:
    """Zeros inside a rectangle, counted over an aspect-limited partition.

    Interior partition lines are nudged when they pass too close to a zero.
    """
    tol = tol or problem.tol
    x0, x1, y0, y1 = map(float, rect)
    xs, ys = _split_aspect((x0, x1, y0, y1), max_aspect)
    for attempt in range(retries + 1):
        try:
            total = 0
            for i in range(xs.size - 1):
                for j in range(ys.size - 1):
                    total += count_zeros_rect(problem, (xs[i], xs[i + 1], ys[j], ys[j + 1]),
                                              points_per_side, tol)
            return total
        except ContourTooClose:
            if attempt == retries or (xs.size == 2 and ys.size == 2):
                raise
            # golden-ratio nudges keep retries from cycling
            shift = ((attempt + 1) * 0.6180339887) % 1.0 - 0.5
            xs[1:-1] += 0.01 * shift * (x1 - x0) / max(1, xs.size - 1)
            ys[1:-1] += 0.01 * shift * (y1 - y0) / max(1, ys.size - 1)
    raise AssertionError("unreachable")


def find_nonreal_eigenvalues(problem, rect, min_size: float = 1e-3, tol: Optional[Tolerances] = None,
                             points_per_side: int = 64) -> list[complex]:
    """Locate zeros of D strictly off the real axis in ``rect`` (upper and lower parts).

    Rectangles with a nonzero count are bisected down to ``min_size`` and
    finished by Newton's method on D.  No completeness claim is made beyond
    the argument-principle counts.
    """
    tol = tol or problem.tol
    x0, x1, y0, y1 = map(float, rect)
    offset = max(min_size, 1e-6 * (1.0 + max(abs(x0), abs(x1))))
    parts = []
    if y1 > offset:
        parts.append((x0, x1, max(y0, offset), y1))
    if y0 < -offset:
        parts.append((x0, x1, y0, min(y1, -offset)))
    found: list[complex] = []
    stack = [(p, None) for p in parts]
    while stack:
        r, known = stack.pop()
        n = known if known is not None else count_zeros_region(problem, r, points_per_side, tol)
        if n == 0:
            continue
        a, b, c, d = r
        if max(b - a, d - c) <= min_size:
            z = complex(0.5 * (a + b), 0.5 * (c + d))
            for _ in range(50):
                Dz = characteristic_many(problem, [z], tol)[0]
                dz = derivatives(problem, z, (1,), radius=min_size, tol=tol)[0]
                step = Dz / dz
                z -= step
                if abs(step) < 1e-13 * (1 + abs(z)):
                    break
            found.append(z)
            continue
        if b - a >= d - c:
            m = 0.5 * (a + b) + 1e-3 * (b - a) * 0.318
            halves = [(a, m, c, d), (m, b, c, d)]
        else:
            m = 0.5 * (c + d) + 1e-3 * (d - c) * 0.318
            halves = [(a, b, c, m), (a, b, m, d)]
        for h in halves:
            stack.append((h, None))
    return sorted(found, key=lambda z: (z.real, z.imag))


# ---------------------------------------------------------------------------
# eigenfunctions by multiple shooting

@dataclass
class ShotFunction:
    """Piecewise trajectory f on [-1, 1] assembled from segment solutions."""

    edges: np.ndarray
    trajectories: list
    states: np.ndarray  # (n_edges, 2): (f, pf') at each edge

    def values(self, x) -> np.ndarray:
        """(f, pf') at x, shape (len(x), 2)."""
        xs = np.atleast_1d(np.asarray(x, float))
        k = np.clip(np.searchsorted(self.edges, xs, side="right") - 1, 0, len(self.trajectories) - 1)
        out = np.empty((xs.size, 2), complex)
        for seg in np.unique(k):
            sel = k == seg
            Y = self.trajectories[seg].fundamental(xs[sel])
            out[sel] = Y @ self.states[seg]
        return out

    def __call__(self, x) -> np.ndarray:
        return self.values(x)[:, 0]

    def boundary_vector(self) -> np.ndarray:
        s0, s1 = self.states[0], self.states[-1]
        return np.array([s0[0], s1[0], s0[1], s1[1]], complex)

    def scaled(self, c: complex) -> "ShotFunction":
        return ShotFunction(self.edges, self.trajectories, c * self.states)


def _segment_edges(problem, lam: complex) -> np.ndarray:
    probe = np.linspace(-1, 1, 401)[1:-1]
    rmax = float(np.max(np.abs(problem.r.evaluate(probe))))
    pmin = float(np.min(np.abs(problem.p.evaluate(probe))))
    k = int(math.ceil(2.0 * (1.0 + math.sqrt(abs(lam) * rmax / max(pmin, 1e-300)))))
    return np.unique(np.concatenate([np.linspace(-1.0, 1.0, k + 1), problem.breaks]))


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > 1e-8 * np.abs(v).max()))
    return v * (abs(v[k]) / v[k])


def eigenfunctions(problem, lam: complex, tol: Optional[Tolerances] = None,
                   rank_tol: float = 1e-6) -> list[ShotFunction]:
    """Eigenfunctions at ``lam`` by multiple shooting.

    Each segment's transfer matrix stays well conditioned, so the global
    continuity plus boundary system resolves exponentially growing and
    decaying halves alike.  Returns one ShotFunction per null vector.
    """
    tol = tol or problem.tol
    edges = _segment_edges(problem, lam)
    K = edges.size - 1
    sysm = problem.system(lam)
    trajs, Phis = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        tr = ode_integrate(sysm, None, (a, b), tol)
        trajs.append(tr)
        Phis.append(tr.fundamental([b])[0])
    n = 2 * (K + 1)
    G = np.zeros((n, n), complex)
    for k, Phi in enumerate(Phis):
        G[2 * k:2 * k + 2, 2 * k:2 * k + 2] = Phi
        G[2 * k:2 * k + 2, 2 * k + 2:2 * k + 4] = -np.eye(2)
    Lm = problem.M - lam * problem.N
    # b = (f(-1), f(1), pf'(-1), pf'(1)) picks states 0 and K
    cols = [0, 2 * K, 1, 2 * K + 1]
    for i in range(2):
        for j, c in enumerate(cols):
            G[2 * K + i, c] = Lm[i, j]
        G[2 * K + i] /= max(np.linalg.norm(G[2 * K + i]), 1e-300)
    _, sv, Vh = np.linalg.svd(G)
    null = np.flatnonzero(sv <= rank_tol * sv[0])
    if null.size == 0:
        raise InvalidInput(f"lambda={lam} is not an eigenvalue (smallest singular value {sv[-1]:.3e})")
    out = []
    for idx in null:
        v = _normalize_phase(Vh[idx].conj())
        out.append(ShotFunction(edges, trajs, v.reshape(K + 1, 2)))
    return out


# ---------------------------------------------------------------------------
# multiplicities and Jordan chains

@dataclass
class RootChain:
    lam: complex
    initial: list  # (f_j, pf_j')(-1) per chain member
    bvecs: list
    residuals: list
    geometric: int
    stop_residual: float
    lead: Optional[ShotFunction] = None

    @property
    def length(self) -> int:
        return len(self.initial)

    def sample(self, problem, points, tol: Optional[Tolerances] = None) -> np.ndarray:
        """f_j at ``points``; shape (length, len(points))."""
        tol = tol or problem.tol
        pts = np.atleast_1d(np.asarray(points, float))
        if self.length == 1 and self.lead is not None:
            return self.lead(pts)[None, :]
        m = self.length - 1
        traj = ode_integrate(problem.system(self.lam, m), np.concatenate(self.initial), (-1.0, 1.0), tol)
        states = traj(pts)
        return states[:, 0::2].T

    def to_dict(self) -> dict:
        return {"lambda": [float(np.real(self.lam)), float(np.imag(self.lam))], "length": self.length,
                "geometric": self.geometric,
                "initial": [[[float(z.real), float(z.imag)] for z in s] for s in self.initial],
                "bvecs": [[[float(z.real), float(z.imag)] for z in b] for b in self.bvecs],
                "residuals": [float(r) for r in self.residuals], "stop_residual": float(self.stop_residual)}


def _chain_endpoint(problem, lam, initial_states: list, tol: Tolerances) -> np.ndarray:
    """State at x = 1 of the depth-(len-1) chain system."""
    m = len(initial_states) - 1
    traj = ode_integrate(problem.system(lam, m), np.concatenate(initial_states), (-1.0, 1.0), tol)
    return traj([1.0])[0]


def jordan_chain(problem, lam0: complex, f0=None, max_depth: int = 4, tol: Optional[Tolerances] = None,
                 chain_tol: float = 1e-6) -> RootChain:
    """Longest chain f_0, f_1, ... at ``lam0`` starting from the eigenfunction ``f0``.

    ``f0`` is the initial state (f, pf')(-1) of the eigenfunction.  Each step
    solves l f_j = lam f_j + f_{j-1} by shooting the coupled system and then the
    2x2 boundary system (M - lam N) b(f_j) = N b(f_{j-1}) in least squares; the
    chain stops when the residual exceeds ``chain_tol`` relative to the data.
    """
    tol = tol or problem.tol
    if f0 is None:
        raise InvalidInput("no eigenfunction supplied")
    s0 = np.asarray(f0, complex).reshape(-1)
    if s0.shape != (2,) or not np.any(s0):
        raise InvalidInput("eigenfunction must be a nonzero initial state (f(-1), pf'(-1))")
    Lm = problem.M - lam0 * problem.N
    end = _chain_endpoint(problem, lam0, [s0], tol)
    b0 = np.array([s0[0], end[0], s0[1], end[1]])
    res0 = float(np.linalg.norm(Lm @ b0) / max(np.linalg.norm(Lm) * np.linalg.norm(b0), 1e-300))
    if res0 > chain_tol:
        raise InvalidInput(f"supplied function is not an eigenfunction at {lam0} (residual {res0:.3e})")
    B, _ = fundamental_b_vectors(problem, lam0, tol)
    C = Lm @ B
    sv = np.linalg.svd(C, compute_uv=False)
    geometric = int(np.sum(sv <= math.sqrt(tol.root_tol) * max(sv[0], 1e-300)))
    initial, bvecs, residuals = [s0], [b0], [res0]
    stop = float("nan")
    for j in range(1, max_depth):
        states = initial + [np.zeros(2, complex)]
        end = _chain_endpoint(problem, lam0, states, tol)
        b_part = np.array([0.0, end[2 * j], 0.0, end[2 * j + 1]], complex)
        rhs = problem.N @ bvecs[-1] - Lm @ b_part
        # truncated pseudo-inverse: the numerically null directions of C are dropped,
        # so an incompatible right-hand side shows up as residual
        U, sv_c, Vh = np.linalg.svd(C)
        keep = sv_c > math.sqrt(tol.root_tol) * max(sv_c[0], 1e-300)
        c = Vh[keep].conj().T @ ((U[:, keep].conj().T @ rhs) / sv_c[keep])
        res = float(np.linalg.norm(C @ c - rhs) / max(1.0, np.linalg.norm(rhs)))
        if res > chain_tol:
            stop = res
            break
        initial.append(c)
        end = _chain_endpoint(problem, lam0, initial, tol)
        bvecs.append(np.array([c[0], end[2 * j], c[1], end[2 * j + 1]], complex))
        residuals.append(res)
    return RootChain(complex(lam0), initial, bvecs, residuals, geometric, stop)


def eigenfunction_initial_states(problem, lam0: complex, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Null vectors of C(lam0) as initial states; columns, phase normalised."""
    B, _ = fundamental_b_vectors(problem, lam0, tol)
    C = (problem.M - lam0 * problem.N) @ B
    _, sv, Vh = np.linalg.svd(C)
    tol = tol or problem.tol
    null = [i for i in range(2) if sv[i] <= math.sqrt(tol.root_tol) * max(sv[0], 1e-300)] or [1]
    return np.stack([_normalize_phase(Vh[i].conj()) for i in null], axis=1)


@dataclass(frozen=True)
class MultiplicityReport:
    lam: complex
    geometric: int
    algebraic_order: int
    algebraic_chain: int
    singular_values: tuple
    radius: float

    @property
    def consistent(self) -> bool:
        return self.algebraic_order == self.algebraic_chain

    def to_dict(self) -> dict:
        return {"lambda": [float(np.real(self.lam)), float(np.imag(self.lam))], "geometric": self.geometric,
                "algebraic_order_of_zero": self.algebraic_order, "algebraic_chain": self.algebraic_chain,
                "consistent": self.consistent, "singular_values": list(self.singular_values),
                "radius": self.radius}


def multiplicity(problem, lam0: complex, radius: Optional[float] = None,
                 tol: Optional[Tolerances] = None) -> MultiplicityReport:
    """Geometric multiplicity from rank C(lam0), algebraic from the zero order and from chains."""
    tol = tol or problem.tol
    B, _ = fundamental_b_vectors(problem, lam0, tol)
    C = (problem.M - lam0 * problem.N) @ B
    sv = np.linalg.svd(C, compute_uv=False)
    thr = math.sqrt(tol.root_tol) * max(sv[0], 1.0)
    for s in sv:
        if thr / 10 < s < 10 * thr:
            raise Indeterminate(f"singular value {s:.3e} is within a factor 10 of the rank threshold {thr:.3e}")
    geometric = int(np.sum(sv <= thr))
    rho = radius or _cauchy_radius(lam0)
    order = count_zeros_circle(problem, lam0, rho, tol=tol)
    if count_zeros_circle(problem, lam0, 0.5 * rho, tol=tol) != order:
        raise Indeterminate("another zero of D lies near the multiplicity circle; pass a smaller radius")
    chain_total = 0
    if geometric:
        starts = eigenfunction_initial_states(problem, lam0, tol)
        for k in range(starts.shape[1]):
            chain_total += jordan_chain(problem, lam0, starts[:, k], max_depth=max(4, order + 1), tol=tol).length
    return MultiplicityReport(complex(lam0), geometric, order, chain_total, tuple(float(s) for s in sv), rho)


# ---------------------------------------------------------------------------
# embedding into the Krein space

def root_vector_embed(chain: RootChain, problem, grid: Grid) -> list[SpaceElement]:
    """Pairs (f_j; N b(f_j)) sampled on ``grid``."""
    vals = chain.sample(problem, grid.nodes)
    out = []
    for j in range(chain.length):
        out.append(SpaceElement(grid, vals[j], problem.N @ chain.bvecs[j]))
    return out


def embed_function(problem, grid: Grid, fn: ShotFunction) -> SpaceElement:
    return SpaceElement(grid, fn(grid.nodes), problem.N @ fn.boundary_vector())


def in_form_domain(problem, element: SpaceElement, f_left: complex, f_right: complex) -> bool:
    return form_domain_predicate(problem.classification).contains(f_left, f_right, element.vec)


def is_simple_zero(problem, lam0: complex, tol: Optional[Tolerances] = None, n: int = 16) -> bool:
    """True when D'(lam0) is clearly nonzero on the scale of D near lam0."""
    rho = _cauchy_radius(lam0)
    theta = 2 * np.pi * np.arange(n) / n
    vals = characteristic_many(problem, lam0 + rho * np.exp(1j * theta), tol)
    d1 = np.mean(vals * np.exp(-1j * theta))  # = D'(lam0) rho
    return bool(abs(d1) >= 1e-3 * np.max(np.abs(vals)))


def root_chains(problem, lam0: complex, tol: Optional[Tolerances] = None, max_depth: int = 4) -> list[RootChain]:
    """All chains at ``lam0``; leading eigenfunctions come from multiple shooting.

    A simple zero of D has a single eigenvector and no chain, so the (less
    accurate at large |lambda|) single-shooting chain construction is skipped.
    """
    tol = tol or problem.tol
    shots = eigenfunctions(problem, lam0, tol)
    if len(shots) == 1 and is_simple_zero(problem, lam0, tol):
        sh = shots[0]
        return [RootChain(complex(lam0), [sh.states[0]], [sh.boundary_vector()], [0.0], 1,
                          float("nan"), lead=sh)]
    starts = eigenfunction_initial_states(problem, lam0, tol)
    chains = []
    for k in range(starts.shape[1]):
        ch = jordan_chain(problem, lam0, starts[:, k], max_depth, tol)
        if ch.length == 1 and k < len(shots):
            sh = shots[k]
            ch = RootChain(ch.lam, [sh.states[0]], [sh.boundary_vector()], ch.residuals, ch.geometric,
                           ch.stop_residual, lead=sh)
        chains.append(ch)
    return chains
