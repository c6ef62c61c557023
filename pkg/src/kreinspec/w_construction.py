"""Grid realisations of uniformly positive operators that preserve the form domain.

Everything here acts on node values over a composite Gauss grid.  The
Hilbert weight is ``mass = w |r|`` and the adjoint of a grid matrix ``A`` is
``mass^-1 A^H mass``; every operator built below is therefore exactly
adjoint-consistent in the discrete inner product.

Transplantation operators are assembled as Galerkin matrices: the pairing
``<S L_j, L_i>`` of Lagrange basis functions is integrated exactly on a
subdivision that respects both the target panels and the mapped source
panels.  The discrete adjoint is then the Galerkin matrix of the closed-form
adjoint, which is what makes ``I + X^# X`` positive on the grid while the
boundary traces stay spectrally accurate.

Boundary traces are read off by evaluating the end-panel polynomial at +-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._kernels import kernel_samples
from .coefficients import (SmoothConnection, check_condition, connection_functions,
                           connection_witness)
from .numerics import Grid


class WConstructionError(Exception):
    """Base class for failures while building positive operators."""


class InvalidConnection(WConstructionError):
    """The coefficient ratio along a connection is unbounded or not positive."""


class DegenerateConnection(WConstructionError):
    """Forward and adjoint traces coincide, so the diagonal block is not solvable."""


class DegenerateMixedCondition(WConstructionError):
    """The 2x2 determinant coupling the two endpoint connections vanishes."""


class HypothesisNotMet(WConstructionError):
    """A condition needed by the requested construction is not satisfied."""


class WrongCase(WConstructionError):
    """The construction needs a different boundary classification."""


class CertificationFailure(WConstructionError):
    """A numerical certificate failed; ``clause`` names it."""

    def __init__(self, clause: str, value: float, bound: float):
        super().__init__(f"{clause}: measured {value:.6g} against bound {bound:.6g}")
        self.clause = clause
        self.value = value
        self.bound = bound


# ---------------------------------------------------------------------------
# cutoff profiles (quintic smoothstep, C^2)

def smoothstep(u):
    u = np.clip(np.asarray(u, float), 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)


def transplant_cutoff(s):
    """1 for s <= 1/4, 0 for s >= 1/2."""
    return 1.0 - smoothstep((np.asarray(s, float) - 0.25) * 4.0)


def endpoint_profile(x):
    """Even profile: 0 on |x| <= 1/2, 1 on |x| >= 3/4."""
    return smoothstep((np.abs(np.asarray(x, float)) - 0.5) * 4.0)


def centre_bump(x):
    """Even bump: 1 on |x| <= 1/8, 0 on |x| >= 1/4."""
    return 1.0 - smoothstep((np.abs(np.asarray(x, float)) - 0.125) * 8.0)


# ---------------------------------------------------------------------------
# grid helpers

def construction_grid(problem, n_panels: int = 128, order: int = 16, extra=()) -> Grid:
    """Symmetric grid holding the coefficient breaks and ``extra`` on both sides."""
    pts = np.concatenate([problem.breaks, np.asarray(extra, float)])
    pts = np.concatenate([pts, -pts])
    return Grid.uniform(n_panels, order, pts)


def grid_mass(grid: Grid, problem) -> np.ndarray:
    return grid.weights * np.abs(np.asarray(problem.r.evaluate(grid.nodes), float))


def traces(grid: Grid, values: np.ndarray) -> np.ndarray:
    """End-panel extrapolation of node values to (-1, 1)."""
    return grid.interp_matrix(np.array([-1.0, 1.0])) @ values


def one_sided(grid: Grid, values: np.ndarray, x: float, side: str) -> complex:
    return complex((grid.interp_matrix(np.array([x]), side) @ values)[0])


@dataclass(frozen=True)
class FmaxReport:
    """Numerical membership test: continuity across panel breaks plus finite energy."""

    max_jump: float
    energy: float

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_jump < tol and np.isfinite(self.energy)


def fmax_check(grid: Grid, values: np.ndarray, problem) -> FmaxReport:
    jumps = grid.jumps(values)
    scale = max(1.0, float(np.max(np.abs(values))))
    deriv = grid.derivative_matrix() @ values
    p = np.asarray(problem.p.evaluate(grid.nodes), float)
    energy = float(np.dot(grid.weights, p * np.abs(deriv) ** 2))
    return FmaxReport(float(np.max(np.abs(jumps), initial=0.0)) / scale, energy)


# ---------------------------------------------------------------------------
# grid operators

@dataclass(frozen=True, eq=False)
class OperatorGrid:
    """A matrix on node values with the weighted adjoint for ``mass = w |r|``.

    ``domain``/``codomain`` are support tags: '[-1,0]', '[0,1]' or '[-1,1]'.
    """

    grid: Grid
    matrix: np.ndarray
    mass: np.ndarray
    domain: str = "[-1,1]"
    codomain: str = "[-1,1]"
    name: str = ""

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    def adjoint(self) -> "OperatorGrid":
        adj = (self.matrix.conj().T * self.mass[None, :]) / self.mass[:, None]
        return OperatorGrid(self.grid, adj, self.mass, self.codomain, self.domain, self.name + "*")

    def __add__(self, other: "OperatorGrid") -> "OperatorGrid":
        dom = self.domain if self.domain == other.domain else "[-1,1]"
        cod = self.codomain if self.codomain == other.codomain else "[-1,1]"
        return OperatorGrid(self.grid, self.matrix + other.matrix, self.mass, dom, cod)

    def __mul__(self, c: complex) -> "OperatorGrid":
        return OperatorGrid(self.grid, c * self.matrix, self.mass, self.domain, self.codomain, self.name)

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorGrid") -> "OperatorGrid":
        return OperatorGrid(self.grid, self.matrix @ other.matrix, self.mass, other.domain, self.codomain)

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.sum(self.mass * f * np.conj(g)))

    def norm(self) -> float:
        s = np.sqrt(self.mass)
        return float(np.linalg.norm(s[:, None] * self.matrix / s[None, :], 2))

    def adjoint_residual(self, rng: np.random.Generator, n_pairs: int = 50) -> float:
        """max |<Af,g> - <f,A*g>| / (|Af||g| + |f||A*g|) over random smooth pairs."""
        adj = self.adjoint()
        worst = 0.0
        for _ in range(n_pairs):
            f = random_smooth(self.grid, rng)
            g = random_smooth(self.grid, rng)
            lhs = self.inner(self(f), g)
            rhs = self.inner(f, adj(g))
            scale = (np.sqrt(self.inner(self(f), self(f)).real * self.inner(g, g).real)
                     + np.sqrt(self.inner(f, f).real * self.inner(adj(g), adj(g)).real) + 1e-300)
            worst = max(worst, abs(lhs - rhs) / scale)
        return float(worst)

    @classmethod
    def identity(cls, grid: Grid, mass: np.ndarray) -> "OperatorGrid":
        return cls(grid, np.eye(grid.size), mass, name="I")

    @classmethod
    def multiplication(cls, grid: Grid, mass: np.ndarray, values, tag: str = "[-1,1]",
                       name: str = "") -> "OperatorGrid":
        v = np.asarray(values, complex) * _support_mask(grid, tag)
        return cls(grid, np.diag(v), mass, tag, tag, name)


def _support_mask(grid: Grid, tag: str) -> np.ndarray:
    if tag == "[-1,0]":
        return (grid.nodes < 0).astype(float)
    if tag == "[0,1]":
        return (grid.nodes > 0).astype(float)
    if tag == "[-1,1]":
        return np.ones(grid.size)
    raise ValueError(f"unknown support tag {tag!r}")


def sign_matrix(grid: Grid) -> np.ndarray:
    return np.sign(grid.nodes)


def random_smooth(grid: Grid, rng: np.random.Generator, degree: int = 5,
                  ends: Optional[tuple] = None) -> np.ndarray:
    """Random complex polynomial in node values; ``ends`` fixes the values at -1 and 1."""
    x = grid.nodes
    coef = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
    f = np.polynomial.legendre.legval(x, coef)
    if ends is not None:
        a, b = ends
        bubble = (1.0 - x ** 2) * np.polynomial.legendre.legval(x, coef[:-2])
        f = a * (1.0 - x) / 2.0 + b * (1.0 + x) / 2.0 + 0.3 * bubble
    return f


def _half(tag_point: str) -> str:
    return "[-1,0]" if tag_point in ("-1+", "0-") else "[0,1]"


# ---------------------------------------------------------------------------
# transplantation

@dataclass(frozen=True, eq=False)
class Transplantation:
    """Transplant along an affine connection, with its traces and cutoff width."""

    op: OperatorGrid
    connection: SmoothConnection
    eps: float
    aligned: bool

    @property
    def forward(self) -> float:
        """(Sf)(b) / f(a)."""
        return self.connection.trace_forward

    @property
    def backward(self) -> float:
        """(S*g)(a) / g(b)."""
        return self.connection.trace_adjoint

    def adjoint_closed_form(self, problem, g: Callable, x) -> np.ndarray:
        """Pointwise adjoint: (S*g)(alpha(t)) = cutoff * |beta'| * rho(t) * g(beta(t))."""
        conn = self.connection
        x = np.asarray(x, float)
        t = conn.alpha_inv(x)
        inside = (t > 0) & (t <= 0.5 * self.eps)
        out = np.zeros(x.shape, complex)
        if np.any(inside):
            rho, _ = connection_functions(problem.p, problem.r, conn)
            ti = t[inside]
            out[inside] = (transplant_cutoff(ti / self.eps) * abs(conn.beta_slope) * rho(ti)
                           * g(conn.beta(ti)))
        return out

    def forward_closed_form(self, f: Callable, y) -> np.ndarray:
        conn = self.connection
        y = np.asarray(y, float)
        t = conn.beta_inv(y)
        inside = (t >= 0) & (t <= 0.5 * self.eps)
        out = np.zeros(y.shape, complex)
        ti = t[inside]
        out[inside] = abs(conn.alpha_slope) * transplant_cutoff(ti / self.eps) * f(conn.alpha(ti))
        return out


def _is_break(grid: Grid, x: float) -> bool:
    return bool(np.min(np.abs(grid.breaks - x)) < 1e-13)


def _aligned_eps(grid: Grid, conn: SmoothConnection, bound: float) -> tuple[float, bool]:
    """Largest eps <= bound whose cutoff transition points are panel breaks on both sides."""
    sa, sb = abs(conn.alpha_slope), abs(conn.beta_slope)
    dirb = np.sign(conn.beta_slope)
    dira = np.sign(conn.alpha_slope)
    dists = np.sort(np.abs(grid.breaks - conn.b))[::-1]
    fallback = None
    for d in dists:
        if d <= 0 or d > 0.5 * sb * bound + 1e-14:
            continue
        eps = 2.0 * d / sb
        y_ok = _is_break(grid, conn.b + dirb * d) and _is_break(grid, conn.b + dirb * d / 2)
        x_ok = (_is_break(grid, conn.a + dira * sa * eps / 2)
                and _is_break(grid, conn.a + dira * sa * eps / 4))
        if y_ok and x_ok:
            return float(eps), True
        if y_ok and fallback is None:
            fallback = float(eps)
    return (fallback if fallback is not None else float(bound)), False


def build_transplantation(grid: Grid, problem, connection: SmoothConnection,
                          eps: Optional[float] = None, n_quad: Optional[int] = None) -> Transplantation:
    """Galerkin matrix of (Sf)(y) = |alpha'| cutoff(t/eps) f(alpha(t)) at y = beta(t)."""
    conn = connection
    _, varpi = connection_functions(problem.p, problem.r, conn)
    ts = np.linspace(conn.eps * 1e-6, conn.eps, 257)
    with np.errstate(all="ignore"):
        vals = varpi(ts)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise InvalidConnection(f"p ratio along {conn.source}->{conn.target} is not bounded")
    sa, sb = abs(conn.alpha_slope), abs(conn.beta_slope)
    bound = min(conn.eps if eps is None else eps, 1.0 / (2.0 * max(sa, sb)))
    eps_eff, aligned = _aligned_eps(grid, conn, bound)

    # subdivision in y: target breaks, mapped source breaks, cutoff transitions
    y_end = float(conn.beta(0.5 * eps_eff))
    lo, hi = sorted((conn.b, y_end))
    cuts = [lo, hi, float(conn.beta(0.25 * eps_eff))]
    cuts += [b for b in grid.breaks if lo < b < hi]
    x_lo, x_hi = sorted((conn.a, float(conn.alpha(0.5 * eps_eff))))
    for xb in grid.breaks:
        if x_lo < xb < x_hi:
            cuts.append(float(conn.beta(conn.alpha_inv(xb))))
    cuts = np.unique(np.round(np.asarray(cuts, float), 15))
    nq = n_quad or grid.order + 4
    tq, wq = np.polynomial.legendre.leggauss(nq)
    a, b = cuts[:-1], cuts[1:]
    yq = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * tq[None, :]).ravel()
    wy = (0.5 * (b - a)[:, None] * wq[None, :]).ravel()
    t = conn.beta_inv(yq)
    zq = conn.alpha(t)
    weight = wy * sa * transplant_cutoff(t / eps_eff) * np.abs(problem.r.evaluate(yq))
    Vy = grid.interp_matrix(yq)
    Vz = grid.interp_matrix(zq)
    G = Vy.T @ (weight[:, None] * Vz)
    mass = grid_mass(grid, problem)
    op = OperatorGrid(grid, G / mass[:, None], mass, _half(conn.source), _half(conn.target),
                      f"S[{conn.source}->{conn.target}]")
    return Transplantation(op, conn, float(eps_eff), aligned)


# ---------------------------------------------------------------------------
# blocks

def solve_diagonal_coefficients(forward: float, backward: float, target: complex) -> tuple[complex, complex]:
    """(g1, g2) with g1*forward + g2 = target and conj(g1)*backward + conj(g2) = 1."""
    if abs(forward - backward) <= 1e-12 * max(1.0, abs(forward)):
        raise DegenerateConnection(f"forward trace {forward} equals adjoint trace {backward}")
    g1 = (complex(target) - 1.0) / (forward - backward)
    g2 = complex(target) - g1 * forward
    return g1, g2


def build_diagonal_X(S: Transplantation, P: OperatorGrid, target: complex) -> tuple[OperatorGrid, tuple]:
    """g1 S + g2 P with trace ``target`` and adjoint trace 1 at the connected point."""
    g1, g2 = solve_diagonal_coefficients(S.forward, S.backward, target)
    X = g1 * S.op + g2 * P
    return OperatorGrid(X.grid, X.matrix, X.mass, S.op.domain, S.op.codomain, "X_diag"), (g1, g2)


def mixed_upsilon(case: str, S1: Transplantation, S2: Transplantation) -> float:
    A1, B1, A2, B2 = S1.forward, S1.backward, S2.forward, S2.backward
    if case in ("A", "B"):
        return A1 * B2 - A2 * B1
    if case == "C":
        return A1 * A2 - B2 * B1
    raise ValueError(f"unknown mixed case {case!r}")


def build_offdiagonal_X(case: str, S1: Transplantation, S2: Transplantation,
                        b12: complex, b21: complex) -> tuple[OperatorGrid, OperatorGrid, float]:
    """Blocks mapping between the two endpoint halves.

    Case A: both connections run -1 -> 1.  Case B: both run 1 -> -1.
    Case C: the first runs -1 -> 1, the second 1 -> -1.
    Traces: (X12 f)(-1) = -b12 f(1), (X21 f)(1) = b21 f(-1), adjoint traces vanish.
    """
    ups = mixed_upsilon(case, S1, S2)
    if abs(ups) < 1e-10:
        raise DegenerateMixedCondition(f"determinant {ups:.3g} for case {case}")
    A1, B1, A2, B2 = S1.forward, S1.backward, S2.forward, S2.backward
    s1, s2 = S1.op, S2.op
    if case == "A":
        X21 = (b21 / ups) * (B2 * s1 + (-B1) * s2)
        X12 = (-b12 / ups) * (A1 * s2.adjoint() + (-A2) * s1.adjoint())
    elif case == "B":
        X12 = (-b12 / ups) * (B2 * s1 + (-B1) * s2)
        X21 = (b21 / ups) * (A1 * s2.adjoint() + (-A2) * s1.adjoint())
    else:
        X12 = (-b12 / ups) * (A1 * s2 + (-B2) * s1.adjoint())
        X21 = (b21 / ups) * (A2 * s1 + (-B1) * s2.adjoint())
    X12 = OperatorGrid(X12.grid, X12.matrix, X12.mass, "[0,1]", "[-1,0]", "X12")
    X21 = OperatorGrid(X21.grid, X21.matrix, X21.mass, "[-1,0]", "[0,1]", "X21")
    return X12, X21, float(ups)


def offdiagonal_traces(grid: Grid, X12: OperatorGrid, X21: OperatorGrid, b12: complex, b21: complex,
                       rng: np.random.Generator, n_tests: int = 4) -> dict:
    """Worst deviation of the four trace identities over smooth test functions."""
    out = {"X12_forward": 0.0, "X12_adjoint": 0.0, "X21_forward": 0.0, "X21_adjoint": 0.0}
    a12, a21 = X12.adjoint(), X21.adjoint()
    for k in range(n_tests):
        f = random_smooth(grid, rng, ends=(rng.normal() + 1j * rng.normal(), rng.normal() + 1j * rng.normal()))
        fm, fp = traces(grid, f)
        out["X12_forward"] = max(out["X12_forward"], abs(traces(grid, X12(f))[0] + b12 * fp))
        out["X12_adjoint"] = max(out["X12_adjoint"], abs(traces(grid, a12(f))[1]))
        out["X21_forward"] = max(out["X21_forward"], abs(traces(grid, X21(f))[1] - b21 * fm))
        out["X21_adjoint"] = max(out["X21_adjoint"], abs(traces(grid, a21(f))[0]))
    return {k: float(v) for k, v in out.items()}


# ---------------------------------------------------------------------------
# boundary action

@dataclass(frozen=True)
class BoundaryActionReport:
    measured: np.ndarray
    target: np.ndarray
    deviation: float
    fit_residual: float
    n_tests: int

    @property
    def passed(self) -> bool:
        return self.deviation < 1e-6

    def to_dict(self) -> dict:
        def cm(A):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A, complex)]
        return {"measured": cm(self.measured), "target": cm(self.target), "deviation": self.deviation,
                "fit_residual": self.fit_residual, "n_tests": self.n_tests, "passed": self.passed}


def boundary_test_family(grid: Grid, rng: np.random.Generator, n_random: int = 5) -> list[np.ndarray]:
    x = grid.nodes
    fam = [(1.0 - x) / 2.0 + 0j, (1.0 + x) / 2.0 + 0j, np.ones_like(x, dtype=complex)]
    for _ in range(n_random):
        ends = (rng.normal() + 1j * rng.normal(), rng.normal() + 1j * rng.normal())
        fam.append(random_smooth(grid, rng, ends=ends))
    return fam


def measure_boundary_action(W: OperatorGrid, target, rng: Optional[np.random.Generator] = None,
                            n_random: int = 5) -> BoundaryActionReport:
    """Least-squares fit of (Wf)(+-1) = B (f(-1), f(1)) over a smooth test family."""
    rng = rng or np.random.default_rng(0)
    fam = boundary_test_family(W.grid, rng, n_random)
    F = np.array([traces(W.grid, f) for f in fam])
    G = np.array([traces(W.grid, W(f)) for f in fam])
    sol, *_ = np.linalg.lstsq(F, G, rcond=None)
    B = sol.T
    resid = float(np.max(np.abs(F @ sol - G)))
    target = np.asarray(target, complex).reshape(2, 2)
    return BoundaryActionReport(B, target, float(np.max(np.abs(B - target))), resid, len(fam))


def positivity_margin(Y: OperatorGrid) -> float:
    """Smallest eigenvalue of the symmetrised form of Y in the weighted inner product.

    Only the rows and columns where Y differs from the identity are solved;
    the rest contributes eigenvalue 1.
    """
    E = Y.matrix - np.eye(Y.grid.size)
    idx = np.flatnonzero(np.any(E != 0, axis=0) | np.any(E != 0, axis=1))
    s = np.sqrt(Y.mass[idx])
    H = s[:, None] * Y.matrix[np.ix_(idx, idx)] / s[None, :]
    low = float(np.linalg.eigvalsh(0.5 * (H + H.conj().T))[0]) if idx.size else 1.0
    return min(low, 1.0) if idx.size < Y.grid.size else low


# ---------------------------------------------------------------------------
# patterns: Y = I + sum X^# X and W = J0 Y

@dataclass(frozen=True, eq=False)
class XPattern:
    """One correction X with its description."""

    X: OperatorGrid
    label: str
    details: dict = field(default_factory=dict)

    def gram(self) -> np.ndarray:
        """X^# X, computed on the support of X only."""
        M = self.X.matrix
        rows = np.flatnonzero(np.any(M != 0, axis=1))
        cols = np.flatnonzero(np.any(M != 0, axis=0))
        out = np.zeros((M.shape[1], M.shape[1]), complex)
        sub = M[np.ix_(rows, cols)]
        mass = self.X.mass
        block = (sub.conj().T * mass[rows][None, :]) @ sub / mass[cols][:, None]
        out[np.ix_(cols, cols)] = block
        return out


@dataclass(frozen=True, eq=False)
class PositiveOperator:
    """W = J0 (I + sum of X^# X) with its parts and measurements."""

    W: OperatorGrid
    Y: OperatorGrid
    patterns: tuple
    target: np.ndarray
    route: str = ""

    @property
    def grid(self) -> Grid:
        return self.W.grid

    def boundary_action(self, rng=None) -> BoundaryActionReport:
        return measure_boundary_action(self.W, self.target, rng)

    def positivity(self) -> float:
        return positivity_margin(self.Y)


def _from_patterns(grid: Grid, mass: np.ndarray, patterns, target, route: str = "") -> PositiveOperator:
    Ym = np.eye(grid.size, dtype=complex)
    for pat in patterns:
        Ym = Ym + pat.gram()
    Y = OperatorGrid(grid, Ym, mass, name="Y")
    W = OperatorGrid(grid, sign_matrix(grid)[:, None] * Ym, mass, name="W")
    return PositiveOperator(W, Y, tuple(patterns), np.asarray(target, complex).reshape(2, 2), route)


def _witness(problem, which: str) -> SmoothConnection:
    verdict = check_condition(problem, which)
    if not verdict.satisfied or not verdict.witnesses:
        raise HypothesisNotMet(f"condition {which} is {verdict.verdict} ({verdict.tag or 'no witness'})")
    return verdict.witnesses[0]


def mixed_witnesses(problem) -> tuple[str, SmoothConnection, SmoothConnection]:
    verdict = check_condition(problem, "Mixed")
    if not verdict.satisfied or len(verdict.witnesses) != 2:
        raise HypothesisNotMet(f"mixed condition is {verdict.verdict} ({verdict.tag or 'no witness'})")
    return verdict.case, verdict.witnesses[0], verdict.witnesses[1]


def mixed_layout(problem, case: str, slopes1=(1.0, 1.0), slopes2=(2.0, 1.0)):
    """Explicit pair of endpoint connections for one of the layouts A, B, C."""
    layouts = {"A": (("-1+", "1-"), ("-1+", "1-")), "B": (("1-", "-1+"), ("1-", "-1+")),
               "C": (("-1+", "1-"), ("1-", "-1+"))}
    (s1, t1), (s2, t2) = layouts[case]
    c1 = connection_witness(problem.p, problem.r, s1, t1, slopes1)
    c2 = connection_witness(problem.p, problem.r, s2, t2, slopes2)
    if c1 is None or c2 is None:
        raise HypothesisNotMet(f"no affine connection for layout {case}")
    return case, c1, c2


def endpoint_pattern(grid: Grid, problem, side: str, value: complex,
                     connection: Optional[SmoothConnection] = None) -> XPattern:
    """Correction near one endpoint giving (J0 Y f)(end) = value * f(end)."""
    which = "AtMinus1" if side == "-1" else "AtPlus1"
    conn = connection or _witness(problem, which)
    S = build_transplantation(grid, problem, conn)
    mass = grid_mass(grid, problem)
    tag = "[-1,0]" if side == "-1" else "[0,1]"
    P = OperatorGrid.multiplication(grid, mass, endpoint_profile(grid.nodes), tag, "P")
    target = -complex(value) - 1.0 if side == "-1" else complex(value) - 1.0
    X, coeffs = build_diagonal_X(S, P, target)
    return XPattern(X, f"endpoint{side}", {"coefficients": coeffs, "eps": S.eps, "aligned": S.aligned,
                                          "connection": conn.to_dict()})


def centre_pattern(grid: Grid, problem, connection: Optional[SmoothConnection] = None) -> XPattern:
    """Correction near 0 making J0 Y map continuous functions to continuous functions."""
    conn = connection or _witness(problem, "At0")
    S = build_transplantation(grid, problem, conn)
    mass = grid_mass(grid, problem)
    tag = _half(conn.target)
    P = OperatorGrid.multiplication(grid, mass, centre_bump(grid.nodes), tag, "P0")
    X, coeffs = build_diagonal_X(S, P, -2.0)
    return XPattern(X, "centre", {"coefficients": coeffs, "eps": S.eps, "aligned": S.aligned,
                                  "connection": conn.to_dict()})


def coupled_pattern(grid: Grid, problem, b, mixed=None, minus: Optional[SmoothConnection] = None,
                    plus: Optional[SmoothConnection] = None) -> XPattern:
    """Full 2x2 endpoint block realising an arbitrary boundary matrix ``b``."""
    b = np.asarray(b, complex).reshape(2, 2)
    case, c1, c2 = mixed if mixed is not None else mixed_witnesses(problem)
    mass = grid_mass(grid, problem)
    Sm = build_transplantation(grid, problem, minus or _witness(problem, "AtMinus1"))
    Sp = build_transplantation(grid, problem, plus or _witness(problem, "AtPlus1"))
    prof = endpoint_profile(grid.nodes)
    X11, g11 = build_diagonal_X(Sm, OperatorGrid.multiplication(grid, mass, prof, "[-1,0]"), -b[0, 0] - 1.0)
    X22, g22 = build_diagonal_X(Sp, OperatorGrid.multiplication(grid, mass, prof, "[0,1]"), b[1, 1] - 1.0)
    S1 = build_transplantation(grid, problem, c1)
    S2 = build_transplantation(grid, problem, c2)
    X12, X21, ups = build_offdiagonal_X(case, S1, S2, b[0, 1], b[1, 0])
    X = X11 + X12 + X21 + X22
    return XPattern(X, "coupled", {"case": case, "upsilon": ups, "X11": X11, "X22": X22, "X12": X12,
                                   "X21": X21, "coefficients": (g11, g22)})


def assemble_Ws1(problem, grid: Grid, b, mixed=None, check: bool = True,
                 rng: Optional[np.random.Generator] = None) -> tuple[PositiveOperator, BoundaryActionReport]:
    """Endpoint operator with boundary action ``b``; equals J0 on |x| <= 1/2."""
    pat = coupled_pattern(grid, problem, b, mixed)
    op = _from_patterns(grid, grid_mass(grid, problem), [pat], b, "coupled")
    report = op.boundary_action(rng)
    if check:
        margin = op.positivity()
        if margin < 1.0 - 1e-6:
            raise CertificationFailure("J0 W >= I", margin, 1.0 - 1e-6)
    return op, report


# ---------------------------------------------------------------------------
# gluing by route

ROUTES = ("k0", "k2-positive", "k2-negative", "k2-indefinite", "k1-u", "k1-v", "k1-uv")

ROUTE_CONDITIONS = {
    "k0": ("At0",),
    "k2-positive": ("At0", "AtMinus1"),
    "k2-negative": ("At0", "AtPlus1"),
    "k2-indefinite": ("At0", "AtMinus1", "AtPlus1", "Mixed"),
    "k1-u": ("At0", "AtMinus1"),
    "k1-v": ("At0", "AtPlus1"),
    "k1-uv": ("At0", "AtMinus1", "AtPlus1", "Mixed"),
}


def route_for(problem) -> str:
    """Which gluing fits the boundary classification."""
    cls = problem.classification
    if cls.case == "a":
        return "k0"
    if cls.case == "c":
        return {"positive": "k2-positive", "negative": "k2-negative",
                "indefinite": "k2-indefinite"}[problem.delta_info.definiteness]
    return {"u": "k1-u", "v": "k1-v", "uv": "k1-uv"}[cls.support]


def route_target(problem, route: str) -> np.ndarray:
    if route == "k0":
        return np.diag([-1.0, 1.0]).astype(complex)
    if route == "k2-positive":
        return np.eye(2, dtype=complex)
    if route == "k2-negative":
        return -np.eye(2, dtype=complex)
    if route == "k2-indefinite":
        return problem.delta_info.delta_inv.astype(complex)
    if route == "k1-u":
        return np.diag([0.0, 1.0]).astype(complex)
    if route == "k1-v":
        return np.diag([-1.0, 0.0]).astype(complex)
    if route == "k1-uv":
        return np.zeros((2, 2), complex)
    raise ValueError(f"unknown route {route!r}")


def build_W0(problem, grid: Grid) -> PositiveOperator:
    """Centre correction alone; acts as J0 near the endpoints."""
    pat = centre_pattern(grid, problem)
    return _from_patterns(grid, grid_mass(grid, problem), [pat], route_target(problem, "k0"), "k0")


def build_Wm1(problem, grid: Grid, value: complex) -> PositiveOperator:
    pat = endpoint_pattern(grid, problem, "-1", value)
    return _from_patterns(grid, grid_mass(grid, problem), [pat], np.diag([value, 1.0]), "endpoint-1")


def build_Wp1(problem, grid: Grid, value: complex) -> PositiveOperator:
    pat = endpoint_pattern(grid, problem, "+1", value)
    return _from_patterns(grid, grid_mass(grid, problem), [pat], np.diag([-1.0, value]), "endpoint+1")


def build_W01(problem, grid: Grid, route: Optional[str] = None) -> PositiveOperator:
    """Centre correction glued to the endpoint correction chosen by ``route``."""
    route = route or route_for(problem)
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}; choose from {ROUTES}")
    for which in ROUTE_CONDITIONS[route]:
        verdict = check_condition(problem, which)
        if not verdict.satisfied:
            raise HypothesisNotMet(f"route {route} needs {which}, which is {verdict.verdict}")
    pats = [centre_pattern(grid, problem)]
    if route == "k2-positive":
        pats.append(endpoint_pattern(grid, problem, "-1", 1.0))
    elif route == "k2-negative":
        pats.append(endpoint_pattern(grid, problem, "+1", -1.0))
    elif route == "k1-u":
        pats.append(endpoint_pattern(grid, problem, "-1", 0.0))
    elif route == "k1-v":
        pats.append(endpoint_pattern(grid, problem, "+1", 0.0))
    elif route in ("k2-indefinite", "k1-uv"):
        pats.append(coupled_pattern(grid, problem, route_target(problem, route)))
    return _from_patterns(grid, grid_mass(grid, problem), pats, route_target(problem, route), route)


# ---------------------------------------------------------------------------
# constants

@dataclass(frozen=True)
class PositivityConstants:
    alpha: float
    c: float
    kappa: float
    eta: float
    delta1: float
    delta2: float
    r_norm1: float
    gamma: float
    tail_bound: float  # (c / (alpha eta))^2

    @property
    def identity_residual(self) -> float:
        """1 - kappa - alpha/delta2, zero up to rounding."""
        return 1.0 - self.kappa - self.alpha / self.delta2

    @property
    def z_bound(self) -> float:
        return self.alpha / (2.0 * self.delta2)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "c": self.c, "kappa": self.kappa, "eta": self.eta,
                "delta1": self.delta1, "delta2": self.delta2, "r_norm1": self.r_norm1,
                "gamma": self.gamma, "tail_bound": self.tail_bound,
                "identity_residual": self.identity_residual}


def constants_from(delta1: float, delta2: float, eta: float, r_norm1: float) -> tuple[float, float, float]:
    """(alpha, c, kappa) for the given spectral data of Delta and ||r||_1."""
    alpha = delta2 / (1.0 + 2.0 * r_norm1 * delta2 * eta ** 2)
    c = alpha / (2.0 * delta2) * np.sqrt(delta1 / 2.0)
    kappa = 2.0 * alpha * eta ** 2 * r_norm1
    return float(alpha), float(c), float(kappa)


def tail_integral(r, gamma: float) -> float:
    """-int_{-1}^{-gamma} r + int_gamma^1 r."""
    if gamma >= 1.0:
        return 0.0
    return float(-r.integrate(-1.0, -gamma) + r.integrate(gamma, 1.0))


def positivity_constants(problem, lattice: int = 1024) -> PositivityConstants:
    info = problem.delta_info
    rn = problem.r_norm1
    alpha, c, kappa = constants_from(info.delta1, info.delta2, info.eta, rn)
    bound = (c / (alpha * info.eta)) ** 2
    slack = 1e-12 * max(1.0, bound)
    lo, hi = 0, lattice  # tail integral decreases in gamma; hi is always feasible
    if tail_integral(problem.r, 0.0) <= bound + slack:
        hi = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail_integral(problem.r, mid / lattice) <= bound + slack:
            hi = mid
        else:
            lo = mid
    return PositivityConstants(alpha, c, kappa, info.eta, info.delta1, info.delta2, rn,
                               hi / lattice, float(bound))


# ---------------------------------------------------------------------------
# psi, kernel, K, Z

@dataclass(frozen=True, eq=False)
class PsiSystem:
    grid: Grid
    constants: PositivityConstants
    u: complex
    v: complex
    psi: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    omega: np.ndarray
    kernel: np.ndarray

    def psi_norm2(self, problem) -> float:
        return float(np.sum(grid_mass(self.grid, problem) * np.abs(self.psi) ** 2))

    def end_values(self) -> np.ndarray:
        """psi at -1, 0 (both sides) and 1."""
        g = self.grid
        return np.array([traces(g, self.psi)[0], one_sided(g, self.psi, 0.0, "left").real,
                         one_sided(g, self.psi, 0.0, "right").real, traces(g, self.psi)[1]]).real

    def symmetry_residuals(self) -> dict:
        """Reality and reflection relations of omega that make the kernel continuous."""
        x = self.grid.nodes
        mi = self.grid.mirror_index()
        pos = x > 0
        om, om_m = self.omega[pos], self.omega[mi][pos]
        u, v = self.u, self.v
        scale = max(1.0, float(np.max(np.abs(self.omega))))
        return {"u_omega_reflected_real": float(np.max(np.abs((np.conj(u) * om_m).imag), initial=0.0)) / scale,
                "v_omega_real": float(np.max(np.abs((np.conj(v) * om).imag), initial=0.0)) / scale,
                "reflection": float(np.max(np.abs(np.conj(v) * om_m - np.conj(np.conj(u) * om)),
                                           initial=0.0)) / scale}

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.kernel - self.kernel.conj().T)))

    def kernel_max(self) -> float:
        return float(np.max(np.abs(self.kernel)))


def psi_grid(problem, constants: PositivityConstants, n_panels: int = 128, order: int = 16) -> Grid:
    g = constants.gamma
    return construction_grid(problem, n_panels, order, [g] if 0.0 < g < 1.0 else [])


def build_psi(problem, constants: PositivityConstants, grid: Optional[Grid] = None) -> PsiSystem:
    cls = problem.classification
    if cls.case != "b":
        raise WrongCase(f"the coupling profile needs one essential row, found case {cls.case}")
    grid = grid or psi_grid(problem, constants)
    mi = grid.mirror_index()
    x = grid.nodes
    gamma = constants.gamma
    p = np.asarray(problem.p.evaluate(x), float)
    integrand = np.where(x >= gamma, 1.0 / np.sqrt(np.abs(p)), 0.0)
    cum = grid.cumulative_matrix() @ integrand  # int_{-1}^{x} = int_0^{x} on x > 0
    phi_pos = np.where(x > 0, cum, cum[mi])
    total = float(np.dot(grid.weights, integrand))
    psi = phi_pos / total
    u, v = complex(cls.u), complex(cls.v)
    info = problem.delta_info
    alpha = constants.alpha
    side = np.where(x < 0, np.conj(u), np.conj(v))
    psi1 = alpha * info.eta11 * side * psi
    psi2 = alpha * info.eta12 * side * psi
    omega = info.eta11 * np.conj(psi1) + info.eta12 * np.conj(psi2)
    kern = kernel_samples(x, x, u, v, omega, omega)
    return PsiSystem(grid, constants, u, v, psi, psi1, psi2, omega, kern)


@dataclass(frozen=True)
class KCertificate:
    norm: float
    kappa: float
    hermitian: float
    kernel_max: float
    kernel_bound: float
    selfadjoint: float
    centre_value: float
    continuity: float
    boundary_identity: float

    def clauses(self) -> dict:
        return {"norm": self.norm <= self.kappa * (1 + 1e-3),
                "kernel_hermitian": self.hermitian <= 1e-12,
                "kernel_bound": self.kernel_max <= self.kernel_bound + 1e-12,
                "selfadjoint": self.selfadjoint <= 1e-8,
                "centre_value": self.centre_value <= 1e-8,
                "continuity": self.continuity <= 1e-6,
                "boundary_identity": self.boundary_identity < 1e-6}

    @property
    def passed(self) -> bool:
        return all(self.clauses().values())

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("norm", "kappa", "hermitian", "kernel_max", "kernel_bound",
                                           "selfadjoint", "centre_value", "continuity", "boundary_identity")}
        d["clauses"] = self.clauses()
        d["passed"] = self.passed
        return d


def krein_pair(grid: Grid, problem, f: np.ndarray, g: np.ndarray) -> complex:
    """[f, g] = int f conj(g) r."""
    r = np.asarray(problem.r.evaluate(grid.nodes), float)
    return complex(np.sum(grid.weights * r * f * np.conj(g)))


def assemble_K(psi: PsiSystem, problem) -> OperatorGrid:
    """Integral operator with the profile kernel, by exact split-range integration.

    Rows are assembled from cumulative integrals so the kinks of the kernel
    along t = +-x never fall inside a quadrature panel.
    """
    grid = psi.grid
    x = grid.nodes
    mi = grid.mirror_index()
    C = grid.cumulative_matrix()
    r = np.asarray(problem.r.evaluate(x), float)
    neg = (x < 0)[:, None]
    lower = np.where(neg, C, C[mi])        # int_{-1}^{-|x|}
    upper = np.where(neg, C[mi], C)        # int_{-1}^{|x|}
    total = grid.weights[None, :]
    om = psi.omega
    u, v = psi.u, psi.v
    mid = np.where(x < 0, np.conj(u), np.conj(v))[:, None]
    K = ((u * np.conj(om))[:, None] * lower * r[None, :]
         + mid * (upper - lower) * (om * r)[None, :]
         + (v * np.conj(om))[:, None] * (total - upper) * r[None, :])
    return OperatorGrid(grid, K, grid_mass(grid, problem), name="K")


def certify_K(K: OperatorGrid, psi: PsiSystem, problem, rng: Optional[np.random.Generator] = None,
              n_tests: int = 20) -> KCertificate:
    rng = rng or np.random.default_rng(1)
    grid = K.grid
    const = psi.constants
    info = problem.delta_info
    # Krein self-adjointness: [Kf, g] = [f, Kg]
    sa = 0.0
    cen = 0.0
    cont = 0.0
    ident = 0.0
    for _ in range(n_tests):
        f = random_smooth(grid, rng, degree=6)
        g = random_smooth(grid, rng, degree=6)
        Kf, Kg = K(f), K(g)
        scale = 1.0 + np.sqrt(np.sum(K.mass * np.abs(f) ** 2) * np.sum(K.mass * np.abs(g) ** 2))
        sa = max(sa, abs(krein_pair(grid, problem, Kf, g) - krein_pair(grid, problem, f, Kg)) / scale)
        left, right = one_sided(grid, Kf, 0.0, "left"), one_sided(grid, Kf, 0.0, "right")
        cen = max(cen, abs(left), abs(right))
        cont = max(cont, float(np.max(np.abs(grid.jumps(Kf)))))
        tm, tp = traces(grid, Kf)
        rhs = info.eta11 * krein_pair(grid, problem, f, psi.psi1) + info.eta12 * krein_pair(grid, problem, f, psi.psi2)
        ident = max(ident, abs(psi.u * tm + psi.v * tp - rhs))
    return KCertificate(K.norm(), const.kappa, psi.hermitian_residual(), psi.kernel_max(),
                        const.kappa / const.r_norm1, float(sa), float(cen), float(cont), float(ident))


@dataclass(frozen=True, eq=False)
class ZPair:
    """Z: C^2 -> functions (columns psi1, psi2) and its Krein adjoint back to C^2."""

    Z: np.ndarray       # n x 2
    Zstar: np.ndarray   # 2 x n
    norm: float
    bound: float
    adjoint_residual: float

    @property
    def passed(self) -> bool:
        return self.norm <= self.bound * (1 + 1e-3) and self.adjoint_residual <= 1e-8

    def to_dict(self) -> dict:
        return {"norm": self.norm, "bound": self.bound, "adjoint_residual": self.adjoint_residual,
                "passed": self.passed}


def _herm_sqrt(A: np.ndarray, inverse: bool = False) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (A + A.conj().T))
    w = np.sqrt(w)
    if inverse:
        w = 1.0 / w
    return (V * w[None, :]) @ V.conj().T


def assemble_Z(psi: PsiSystem, problem, rng: Optional[np.random.Generator] = None) -> ZPair:
    rng = rng or np.random.default_rng(2)
    grid = psi.grid
    info = problem.delta_info
    r = np.asarray(problem.r.evaluate(grid.nodes), float)
    Z = np.stack([psi.psi1, psi.psi2], axis=1)
    Zstar = info.delta_inv @ (np.conj(Z).T * (grid.weights * r)[None, :])
    mass = grid_mass(grid, problem)
    sd = _herm_sqrt(info.abs_delta, inverse=True)
    M = np.sqrt(mass)[:, None] * Z @ sd
    norm = float(np.linalg.norm(M, 2))
    worst = 0.0
    for _ in range(20):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        f = random_smooth(grid, rng)
        lhs = krein_pair(grid, problem, Z @ a, f)
        rhs = complex(np.conj(Zstar @ f) @ info.delta @ a)
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    return ZPair(Z, Zstar, norm, psi.constants.z_bound, float(worst))


@dataclass(frozen=True, eq=False)
class FullOperator:
    """Block operator on functions plus C^2 with its certificate."""

    matrix: np.ndarray
    grid: Grid
    min_eig: float
    bound: float
    coupling: float
    k_cert: KCertificate
    z_pair: ZPair
    w01_margin: float
    w01_action: BoundaryActionReport
    constants: PositivityConstants

    def clauses(self) -> dict:
        out = {f"K_{k}": v for k, v in self.k_cert.clauses().items()}
        out["Z_norm"] = self.z_pair.norm <= self.z_pair.bound * (1 + 1e-3)
        out["Z_adjoint"] = self.z_pair.adjoint_residual <= 1e-8
        out["W01_positive"] = self.w01_margin >= 1.0 - 1e-6
        out["W01_boundary"] = self.w01_action.passed
        out["min_eig"] = self.min_eig >= self.bound - 1e-6
        out["coupling"] = self.coupling < 1e-6
        out["constants_identity"] = abs(self.constants.identity_residual) <= 1e-14
        return out

    @property
    def passed(self) -> bool:
        return all(self.clauses().values())

    def to_dict(self) -> dict:
        return {"constants": self.constants.to_dict(), "K": self.k_cert.to_dict(), "Z": self.z_pair.to_dict(),
                "W01_min_eig": self.w01_margin, "W01_boundary": self.w01_action.to_dict(),
                "min_eig": self.min_eig, "min_eig_bound": self.bound, "coupling_residual": self.coupling,
                "nodes": self.grid.size, "clauses": self.clauses(), "passed": self.passed}


def assemble_W_full(W01: PositiveOperator, K: OperatorGrid, Z: ZPair, psi: PsiSystem, problem,
                    k_cert: Optional[KCertificate] = None, rng: Optional[np.random.Generator] = None,
                    n_tests: int = 20) -> FullOperator:
    rng = rng or np.random.default_rng(3)
    grid = W01.grid
    info = problem.delta_info
    const = psi.constants
    n = grid.size
    top = np.hstack([W01.W.matrix + K.matrix, Z.Z])
    bottom = np.hstack([Z.Zstar, const.alpha * info.delta_inv])
    W = np.vstack([top, bottom])
    J = np.zeros((n + 2, n + 2), complex)
    J[:n, :n] = np.diag(sign_matrix(grid))
    J[n:, n:] = info.sign_delta
    half = np.zeros((n + 2, n + 2), complex)
    half[:n, :n] = np.diag(np.sqrt(W01.W.mass))
    half[n:, n:] = _herm_sqrt(info.abs_delta)
    half_inv = np.zeros_like(half)
    half_inv[:n, :n] = np.diag(1.0 / np.sqrt(W01.W.mass))
    half_inv[n:, n:] = _herm_sqrt(info.abs_delta, inverse=True)
    H = half @ J @ W @ half_inv
    min_eig = float(np.linalg.eigvalsh(0.5 * (H + H.conj().T))[0])
    # form-domain invariance on (f; u f(-1) + v f(1); z)
    worst = 0.0
    u, v = psi.u, psi.v
    for _ in range(n_tests):
        f = random_smooth(grid, rng, degree=6)
        fm, fp = traces(grid, f)
        z = complex(rng.normal() + 1j * rng.normal())
        a = np.array([u * fm + v * fp, z])
        out = W @ np.concatenate([f, a])
        g, w = out[:n], out[n:]
        gm, gp = traces(grid, g)
        rhs = (info.eta11 * krein_pair(grid, problem, f, psi.psi1) + info.eta12 * krein_pair(grid, problem, f, psi.psi2)
               + const.alpha * info.eta11 * a[0] + const.alpha * info.eta12 * z)
        worst = max(worst, abs(u * gm + v * gp - rhs), abs(w[0] - rhs))
    k_cert = k_cert or certify_K(K, psi, problem)
    return FullOperator(W, grid, min_eig, const.z_bound, float(worst), k_cert, Z, W01.positivity(),
                        W01.boundary_action(), const)


def certify_full(problem, n_panels: int = 128, order: int = 16) -> FullOperator:
    """End-to-end construction and certification for a problem with one essential row."""
    const = positivity_constants(problem)
    grid = psi_grid(problem, const, n_panels, order)
    psi = build_psi(problem, const, grid)
    W01 = build_W01(problem, grid)
    K = assemble_K(psi, problem)
    Z = assemble_Z(psi, problem)
    return assemble_W_full(W01, K, Z, psi, problem)


@dataclass(frozen=True, eq=False)
class GluedCertificate:
    """Checks on the glued operator alone (problems without the coupling block)."""

    route: str
    margin: float
    action: BoundaryActionReport
    max_jump: float
    max_energy: float
    adjoint: float
    constants: PositivityConstants
    nodes: int

    def clauses(self) -> dict:
        return {"W01_positive": self.margin >= 1.0 - 1e-6, "W01_boundary": self.action.passed,
                "W01_continuity": self.max_jump < 1e-6, "W01_energy_finite": bool(np.isfinite(self.max_energy)),
                "W01_adjoint": self.adjoint <= 1e-8,
                "constants_identity": abs(self.constants.identity_residual) <= 1e-14}

    @property
    def passed(self) -> bool:
        return all(self.clauses().values())

    def to_dict(self) -> dict:
        return {"route": self.route, "constants": self.constants.to_dict(), "W01_min_eig": self.margin,
                "W01_boundary": self.action.to_dict(), "max_jump": self.max_jump, "max_energy": self.max_energy,
                "adjoint_residual": self.adjoint, "nodes": self.nodes, "clauses": self.clauses(),
                "passed": self.passed}


def certify_glued(problem, route: Optional[str] = None, n_panels: int = 128, order: int = 16,
                  n_tests: int = 10) -> GluedCertificate:
    const = positivity_constants(problem)
    grid = construction_grid(problem, n_panels, order)
    W01 = build_W01(problem, grid, route)
    rng = np.random.default_rng(4)
    jumps, energy = 0.0, 0.0
    for _ in range(n_tests):
        rep = fmax_check(grid, W01.W(random_smooth(grid, rng)), problem)
        jumps, energy = max(jumps, rep.max_jump), max(energy, rep.energy)
    return GluedCertificate(W01.route, W01.positivity(), W01.boundary_action(), jumps, energy,
                            W01.W.adjoint_residual(rng, 10), const, grid.size)
