"""Piecewise power-times-polynomial coefficients and the smooth-connection conditions.

A coefficient is a list of pieces, each ``sign * |x - anchor|^nu * poly(x)`` on
an interval, with anchor in {-1, 0, 1}.  On top of that sit order detection,
symmetry flags, affine smooth-connection witnesses and decision procedures
for the conditions at 0, at -1, at +1 and the mixed condition at both ends.
The decision procedures only cover the catalogued coefficient classes and
answer ``Unknown`` elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .numerics import quad_weighted

ANCHORS = (-1.0, 0.0, 1.0)
POINTS = {"-1+": (-1.0, +1), "0-": (0.0, -1), "0+": (0.0, +1), "1-": (1.0, -1)}
_ZERO_TOL = 1e-13


class CoefficientError(Exception):
    """Base class for descriptor problems."""


class InvalidDescriptor(CoefficientError):
    """A descriptor violates its role's invariants."""


class SingularPoint(CoefficientError):
    """Evaluation requested at a negative-exponent anchor."""


class Unsupported(CoefficientError):
    """The data is outside the order-type class handled here."""


@dataclass(frozen=True)
class Piece:
    interval: tuple[float, float]
    sign: float = 1.0
    anchor: float = 0.0
    exponent: float = 0.0
    poly: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        a, b = self.interval
        if not (-1.0 <= a < b <= 1.0):
            raise InvalidDescriptor(f"bad piece interval {self.interval}")
        if self.sign not in (1.0, -1.0):
            raise InvalidDescriptor(f"piece sign must be +1 or -1, got {self.sign}")
        if self.anchor not in ANCHORS:
            raise InvalidDescriptor(f"anchor must be one of -1, 0, 1, got {self.anchor}")
        if len(self.poly) == 0:
            raise InvalidDescriptor("empty polynomial")

    def value(self, x: np.ndarray) -> np.ndarray:
        v = npoly.polyval(x, self.poly)
        if self.exponent != 0.0:
            with np.errstate(divide="ignore"):
                v = v * np.abs(x - self.anchor) ** self.exponent
        return self.sign * v

    def derivative(self, x: np.ndarray) -> np.ndarray:
        dp = npoly.polyval(x, npoly.polyder(self.poly)) if len(self.poly) > 1 else 0.0 * x
        pv = npoly.polyval(x, self.poly)
        if self.exponent == 0.0:
            return self.sign * dp
        d = x - self.anchor
        ad = np.abs(d)
        nu = self.exponent
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.sign * (ad ** nu * dp + nu * ad ** (nu - 1.0) * np.sign(d) * pv)

    def mirrored(self) -> "Piece":
        """Piece of x -> g(-x)."""
        a, b = self.interval
        coeffs = tuple(c * (-1.0) ** k for k, c in enumerate(self.poly))
        return Piece((-b, -a), self.sign, -self.anchor if self.anchor else 0.0, self.exponent, coeffs)

    def to_dict(self) -> dict:
        return {"interval": [float(self.interval[0]), float(self.interval[1])],
                "sign": int(self.sign), "anchor": int(self.anchor),
                "exponent": float(self.exponent), "poly": [float(c) for c in self.poly]}


@dataclass(frozen=True)
class CoefficientDescriptor:
    """Piecewise coefficient with a role in {"p", "q", "r"}."""

    pieces: tuple[Piece, ...]
    role: str = "r"

    def __post_init__(self):
        if self.role not in ("p", "q", "r"):
            raise InvalidDescriptor(f"unknown role {self.role!r}")
        ps = sorted(self.pieces, key=lambda p: p.interval[0])
        object.__setattr__(self, "pieces", tuple(ps))
        if not ps or ps[0].interval[0] != -1.0 or ps[-1].interval[1] != 1.0:
            raise InvalidDescriptor("pieces must cover [-1, 1]")
        for left, right in zip(ps[:-1], ps[1:]):
            if not math.isclose(left.interval[1], right.interval[0], abs_tol=1e-15):
                raise InvalidDescriptor(
                    f"pieces {left.interval} and {right.interval} leave a gap or overlap")

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, value: float, role: str) -> "CoefficientDescriptor":
        sign = -1.0 if value < 0 else 1.0
        return cls((Piece((-1.0, 1.0), sign, 0.0, 0.0, (abs(value),)),), role)

    @classmethod
    def sign_weight(cls, left: float = 1.0, right: float = 1.0) -> "CoefficientDescriptor":
        """r = -left on [-1, 0), right on [0, 1]."""
        return cls((Piece((-1.0, 0.0), -1.0, 0.0, 0.0, (left,)),
                    Piece((0.0, 1.0), 1.0, 0.0, 0.0, (right,))), "r")

    @classmethod
    def from_dict(cls, data, role: str) -> "CoefficientDescriptor":
        if isinstance(data, (int, float)):
            return cls.constant(float(data), role)
        if not isinstance(data, dict) or set(data) - {"pieces"}:
            raise InvalidDescriptor(f"coefficient {role}: expected {{'pieces': [...]}}")
        pieces = []
        for k, pd in enumerate(data.get("pieces", [])):
            unknown = set(pd) - {"interval", "sign", "anchor", "exponent", "poly"}
            if unknown:
                raise InvalidDescriptor(f"coefficient {role}, piece {k}: unknown keys {sorted(unknown)}")
            pieces.append(Piece(tuple(float(v) for v in pd["interval"]),
                                float(pd.get("sign", 1)), float(pd.get("anchor", 0)),
                                float(pd.get("exponent", 0.0)),
                                tuple(float(c) for c in pd.get("poly", [1.0]))))
        return cls(tuple(pieces), role)

    def to_dict(self) -> dict:
        return {"pieces": [p.to_dict() for p in self.pieces]}

    # evaluation -------------------------------------------------------------
    @property
    def breakpoints(self) -> np.ndarray:
        return np.array(sorted({p.interval[0] for p in self.pieces} | {1.0}))

    def _index(self, x: np.ndarray) -> np.ndarray:
        inner = np.array([p.interval[1] for p in self.pieces[:-1]])
        return np.searchsorted(inner, x, side="right")

    def _check_singular(self, x: np.ndarray, idx: np.ndarray):
        for k, p in enumerate(self.pieces):
            if p.exponent < 0.0:
                bad = (idx == k) & (x == p.anchor)
                if np.any(bad):
                    raise SingularPoint(f"{self.role} is singular at x={p.anchor}")

    def evaluate(self, x) -> np.ndarray:
        """Pointwise value; breakpoints take the value of the piece on their right."""
        xs = np.asarray(x, float)
        flat = np.atleast_1d(xs).ravel()
        idx = self._index(flat)
        self._check_singular(flat, idx)
        out = np.empty(flat.shape)
        for k, p in enumerate(self.pieces):
            m = idx == k
            if np.any(m):
                out[m] = p.value(flat[m])
        return out.reshape(xs.shape) if xs.ndim else out[0]

    def derivative(self, x) -> np.ndarray:
        xs = np.asarray(x, float)
        flat = np.atleast_1d(xs).ravel()
        idx = self._index(flat)
        out = np.empty(flat.shape)
        for k, p in enumerate(self.pieces):
            m = idx == k
            if np.any(m):
                out[m] = p.derivative(flat[m])
        return out.reshape(xs.shape) if xs.ndim else out[0]

    def absolute(self) -> "CoefficientDescriptor":
        """Descriptor of |g| (each piece has one sign inside its interval)."""
        out = []
        for p in self.pieces:
            mid = 0.5 * sum(p.interval)
            s = np.sign(p.value(np.array([mid]))[0]) or 1.0
            out.append(Piece(p.interval, p.sign * s, p.anchor, p.exponent, p.poly))
        return CoefficientDescriptor(tuple(out), self.role)

    def integrate(self, a: float = -1.0, b: float = 1.0, tol: float = 1e-12) -> float:
        return float(np.real(quad_weighted(lambda x: np.ones_like(x), self, (a, b), tol).value))

    def norm1(self) -> float:
        return self.absolute().integrate()

    def pack(self) -> tuple:
        """Flat arrays for the compiled kernels: (lo, hi, sign, anchor, nu, poly)."""
        deg = max(len(p.poly) for p in self.pieces)
        lo = np.array([p.interval[0] for p in self.pieces])
        hi = np.array([p.interval[1] for p in self.pieces])
        sg = np.array([p.sign for p in self.pieces])
        an = np.array([p.anchor for p in self.pieces])
        nu = np.array([p.exponent for p in self.pieces])
        pc = np.zeros((len(self.pieces), deg))
        for k, p in enumerate(self.pieces):
            pc[k, :len(p.poly)] = p.poly
        return (lo, hi, sg, an, nu, pc)

    def mirrored(self) -> "CoefficientDescriptor":
        return CoefficientDescriptor(tuple(p.mirrored() for p in self.pieces), self.role)

    def validate(self) -> None:
        """Raise InvalidDescriptor if the role invariants fail."""
        for k, p in enumerate(self.pieces):
            lo, hi = p.interval
            if self.role in ("q", "r") and p.exponent <= -1.0:
                raise InvalidDescriptor(f"{self.role} piece {k}: exponent {p.exponent} not integrable")
            roots = [z.real for z in np.roots(p.poly[::-1]) if abs(z.imag) < 1e-12] if len(p.poly) > 1 else []
            interior = [z for z in roots if lo + 1e-12 < z < hi - 1e-12]
            mid = 0.5 * (lo + hi)
            sval = p.value(np.array([mid]))[0]
            if self.role == "p":
                if sval <= 0 or interior:
                    raise InvalidDescriptor(f"p piece {k}: p must be positive on {p.interval}")
                # 1/p ~ |x-c|^-(nu+m) near a zero/anchor must stay integrable
                for c in {lo, hi}:
                    order = _order_of_piece(p, c)
                    if order is not None and order >= 1.0:
                        raise InvalidDescriptor(f"p piece {k}: 1/p not integrable near x={c}")
            if self.role == "r":
                if interior:
                    raise InvalidDescriptor(f"r piece {k}: r changes sign inside {p.interval}")
                if sval * mid <= 0 or (lo < 0 < hi):
                    raise InvalidDescriptor(f"r piece {k}: x*r(x) > 0 fails on {p.interval}")
            if np.allclose(p.poly, 0.0) and self.role != "q":
                raise InvalidDescriptor(f"{self.role} piece {k} vanishes identically")

    def equals(self, other: "CoefficientDescriptor") -> bool:
        return self.to_dict() == other.to_dict() and self.role == other.role


def sgn_weight() -> CoefficientDescriptor:
    return CoefficientDescriptor.sign_weight()


# ---------------------------------------------------------------------------
# orders

def _root_multiplicity(poly: Sequence[float], x0: float) -> tuple[int, float]:
    """Multiplicity of x0 as root of poly and the reduced value poly^(m)(x0)/m!."""
    c = np.asarray(poly, float)
    scale = max(np.max(np.abs(c)), 1e-300)
    m = 0
    while c.size:
        val = npoly.polyval(x0, c) / math.factorial(m)
        if abs(val) > _ZERO_TOL * scale:
            return m, float(val)
        c = npoly.polyder(c)
        m += 1
    return m, 0.0


def _order_of_piece(p: Piece, point: float) -> Optional[float]:
    m, val = _root_multiplicity(p.poly, point)
    if val == 0.0:
        return None
    nu = float(m)
    if p.anchor == point:
        nu += p.exponent
    return nu


def _residual_magnitude(p: Piece, point: float) -> float:
    m, val = _root_multiplicity(p.poly, point)
    mag = abs(val)
    if p.anchor != point and p.exponent != 0.0:
        mag *= abs(point - p.anchor) ** p.exponent
    return mag


def _adjacent_piece(coef: CoefficientDescriptor, point: str) -> Piece:
    if point not in POINTS:
        raise ValueError(f"point must be one of {sorted(POINTS)}, got {point!r}")
    x0, side = POINTS[point]
    for p in coef.pieces:
        lo, hi = p.interval
        if side > 0 and lo <= x0 < hi:
            return p
        if side < 0 and lo < x0 <= hi:
            return p
    raise ValueError(f"no piece adjacent to {point}")


def detect_order(coef: CoefficientDescriptor, point: str) -> Optional[float]:
    """Order nu of ``coef`` on the half-neighbourhood ``point`` ('-1+', '0-', '0+', '1-').

    None when the residual factor vanishes identically there.
    """
    return _order_of_piece(_adjacent_piece(coef, point), POINTS[point][0])


def _piece_length(coef: CoefficientDescriptor, point: str) -> float:
    p = _adjacent_piece(coef, point)
    return p.interval[1] - p.interval[0]


# ---------------------------------------------------------------------------
# symmetry flags

@dataclass(frozen=True)
class StructureFlags:
    even_p: bool
    odd_r: bool
    nearly_even_p: tuple[bool, Optional[float]]
    nearly_odd_r: tuple[bool, Optional[float]]
    orders: dict

    def to_dict(self) -> dict:
        return {"even_p": self.even_p, "odd_r": self.odd_r,
                "nearly_even_p": list(self.nearly_even_p), "nearly_odd_r": list(self.nearly_odd_r),
                "orders": self.orders}


def _normal_form(p: Piece, lo: float, hi: float):
    """(exponent, anchor, poly) with integer powers folded into the polynomial."""
    nu, c, poly = p.exponent, p.anchor, np.asarray(p.poly, float) * p.sign
    if nu != 0.0 and float(nu).is_integer() and nu > 0:
        side = 1.0 if 0.5 * (lo + hi) > c else -1.0
        factor = npoly.polypow([-c * side, side], int(nu))
        poly = npoly.polymul(poly, factor)
        nu, c = 0.0, 0.0
    if nu == 0.0:
        c = 0.0
    return nu, c, np.trim_zeros(np.asarray(poly, float), "b")


def _reflection_ratio(g: CoefficientDescriptor) -> Optional[float]:
    """Constant k with g(-x) = k g(x) for x in (0, 1], or None."""
    mirror = g.mirrored()
    cuts = sorted({0.0, 1.0}
                  | {e for p in g.pieces for e in p.interval if 0 < e < 1}
                  | {e for p in mirror.pieces for e in p.interval if 0 < e < 1})
    ratio = None
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = np.array([0.5 * (lo + hi)])
        pa = mirror.pieces[int(mirror._index(mid)[0])]
        pb = g.pieces[int(g._index(mid)[0])]
        na, ca, qa = _normal_form(pa, lo, hi)
        nb, cb, qb = _normal_form(pb, lo, hi)
        if na != nb or ca != cb or qa.size != qb.size or qb.size == 0:
            return None
        j = int(np.argmax(np.abs(qb)))
        k = qa[j] / qb[j]
        if not np.allclose(qa, k * qb, rtol=1e-13, atol=1e-14 * np.max(np.abs(qb))):
            return None
        if ratio is None:
            ratio = k
        elif not math.isclose(ratio, k, rel_tol=1e-13):
            return None
    return ratio


def structure_flags(p: CoefficientDescriptor, r: CoefficientDescriptor) -> StructureFlags:
    kp = _reflection_ratio(p)
    kr = _reflection_ratio(r)
    even = kp is not None and math.isclose(kp, 1.0, rel_tol=1e-13)
    odd = kr is not None and math.isclose(kr, -1.0, rel_tol=1e-13)
    ne = (kp is not None and kp > 0 and not even, kp if kp is not None and kp > 0 and not even else None)
    no = (kr is not None and kr < 0 and not odd, -kr if kr is not None and kr < 0 and not odd else None)
    orders = {}
    for name, coef in (("p", p), ("r", r)):
        orders[name] = {pt: detect_order(coef, pt) for pt in POINTS}
    return StructureFlags(even, odd, ne, no, orders)


# ---------------------------------------------------------------------------
# smooth connections

@dataclass(frozen=True)
class SmoothConnection:
    """Affine connection t -> (alpha(t), beta(t)), t in [0, eps].

    ``source``/``target`` are half-neighbourhood labels such as '-1+' or '0-'.
    """

    source: str
    target: str
    alpha_slope: float
    beta_slope: float
    eps: float
    rho0: float
    tau: float
    nu_source: float
    nu_target: float
    r_ratio: float

    @property
    def a(self) -> float:
        return POINTS[self.source][0]

    @property
    def b(self) -> float:
        return POINTS[self.target][0]

    def alpha(self, t):
        return self.a + self.alpha_slope * np.asarray(t, float)

    def beta(self, t):
        return self.b + self.beta_slope * np.asarray(t, float)

    def alpha_inv(self, x):
        return (np.asarray(x, float) - self.a) / self.alpha_slope

    def beta_inv(self, y):
        return (np.asarray(y, float) - self.b) / self.beta_slope

    @property
    def trace_forward(self) -> float:
        """|alpha'|: value of (Sf)(b) / f(a)."""
        return abs(self.alpha_slope)

    @property
    def trace_adjoint(self) -> float:
        """|beta'| rho(0): value of (S*g)(a) / g(b)."""
        return abs(self.beta_slope) * self.rho0

    def to_dict(self) -> dict:
        return {"source": self.source, "target": self.target,
                "alpha_slope": self.alpha_slope, "beta_slope": self.beta_slope,
                "eps": self.eps, "rho0": self.rho0, "tau": self.tau}


def _rho_fn(r: CoefficientDescriptor, conn: SmoothConnection) -> Callable:
    def rho(t):
        t = np.asarray(t, float)
        return np.abs(r.evaluate(conn.beta(t))) / np.abs(r.evaluate(conn.alpha(t)))
    return rho


def _varpi_fn(p: CoefficientDescriptor, conn: SmoothConnection) -> Callable:
    def varpi(t):
        t = np.asarray(t, float)
        return p.evaluate(conn.beta(t)) / p.evaluate(conn.alpha(t))
    return varpi


def connection_functions(p: CoefficientDescriptor, r: CoefficientDescriptor, conn: SmoothConnection):
    """(rho, varpi) as vectorised callables on (0, eps]."""
    return _rho_fn(r, conn), _varpi_fn(p, conn)


def connection_witness(p: CoefficientDescriptor, r: CoefficientDescriptor, source: str, target: str,
                       slopes: tuple[float, float] = (1.0, 2.0)) -> Optional[SmoothConnection]:
    """Affine smooth connection from half-neighbourhood ``source`` to ``target``.

    Returns None when the weight ratio would not be in the energy class
    (target order below source order, or above it by at most 1/2).
    """
    for pt in (source, target):
        if detect_order(p, pt) != 0.0:
            raise Unsupported(f"p is not of order 0 at {pt}")
    nu_a = detect_order(r, source)
    nu_b = detect_order(r, target)
    if nu_a is None or nu_b is None:
        raise Unsupported("r is not of order type at the connected points")
    sa, sb = map(float, slopes)
    if sa <= 0 or sb <= 0:
        raise ValueError("slopes must be positive")
    la, lb = _piece_length(r, source), _piece_length(r, target)
    la = min(la, _piece_length(p, source))
    lb = min(lb, _piece_length(p, target))
    eps = min(0.5 * min(la, lb), la / sa, lb / sb, 1.0 / max(sa, sb))
    R = _residual_magnitude(_adjacent_piece(r, target), POINTS[target][0]) / \
        _residual_magnitude(_adjacent_piece(r, source), POINTS[source][0])
    gap = nu_b - nu_a
    if gap == 0.0:
        rho0 = (sb / sa) ** nu_a * R
    elif gap > 0.5:
        rho0 = 0.0
    else:
        return None
    conn = SmoothConnection(source, target, POINTS[source][1] * sa, POINTS[target][1] * sb,
                            eps, rho0, 1.0, nu_a, nu_b, R)
    varpi = _varpi_fn(p, conn)
    t = np.linspace(eps * 1e-6, eps, 257)
    vals = varpi(t)
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise Unsupported("p ratio is not bounded along the connection")
    tau = 1.01 * max(np.max(vals), 1.0 / np.min(vals))
    return SmoothConnection(conn.source, conn.target, conn.alpha_slope, conn.beta_slope,
                            eps, rho0, float(tau), nu_a, nu_b, R)


# ---------------------------------------------------------------------------
# condition verdicts

CONDITIONS = ("At0", "AtMinus1", "AtPlus1", "Mixed")


@dataclass(frozen=True)
class ConditionVerdict:
    which: str
    verdict: str  # Satisfied | Violated | Unknown
    witnesses: tuple = ()
    case: Optional[str] = None  # A, B or C for the mixed condition
    tag: str = ""
    margin: float = 0.0

    @property
    def satisfied(self) -> bool:
        return self.verdict == "Satisfied"

    def to_dict(self) -> dict:
        return {"which": self.which, "verdict": self.verdict, "case": self.case, "tag": self.tag,
                "margin": self.margin, "witnesses": [w.to_dict() for w in self.witnesses]}


_SLOPE_MENU = ((1.0, 2.0), (1.0, 3.0), (2.0, 1.0), (3.0, 1.0))


def _order_type(p, r, points: Iterable[str]) -> bool:
    try:
        return all(detect_order(p, pt) == 0.0 and detect_order(r, pt) is not None for pt in points)
    except ValueError:
        return False


def _self_condition(p, r, pairs, which: str) -> ConditionVerdict:
    for src, dst in pairs:
        if not _order_type(p, r, (src, dst)):
            continue
        for slopes in _SLOPE_MENU:
            conn = connection_witness(p, r, src, dst, slopes)
            if conn is None:
                break
            margin = abs(conn.trace_forward - conn.trace_adjoint)
            if margin > 1e-6:
                return ConditionVerdict(which, "Satisfied", (conn,), tag="order-type", margin=margin)
    return ConditionVerdict(which, "Unknown", tag="outside catalogue")


def mixed_determinant(case: str, c1: SmoothConnection, c2: SmoothConnection) -> float:
    """Determinant of the mixed condition for the two witnesses."""
    A1, B1 = c1.trace_forward, c1.trace_adjoint
    A2, B2 = c2.trace_forward, c2.trace_adjoint
    if case in ("A", "B"):
        return A1 * B2 - A2 * B1
    if case == "C":
        return A1 * A2 - B2 * B1
    raise ValueError(f"unknown case {case!r}")


def _mixed_search(p, r) -> Optional[ConditionVerdict]:
    layouts = {"A": ("-1+", "1-", "-1+", "1-"), "B": ("1-", "-1+", "1-", "-1+"),
               "C": ("-1+", "1-", "1-", "-1+")}
    for case, (s1, t1, s2, t2) in layouts.items():
        for sl1 in ((1.0, 1.0),) + _SLOPE_MENU:
            for sl2 in ((2.0, 1.0), (1.0, 2.0), (1.0, 1.0), (3.0, 1.0), (1.0, 3.0)):
                c1 = connection_witness(p, r, s1, t1, sl1)
                c2 = connection_witness(p, r, s2, t2, sl2)
                if c1 is None or c2 is None:
                    continue
                ups = mixed_determinant(case, c1, c2)
                if abs(ups) > 1e-6:
                    return ConditionVerdict("Mixed", "Satisfied", (c1, c2), case, "order-type", abs(ups))
    return None


def check_condition(problem, which: str) -> ConditionVerdict:
    """Decide one of the conditions 'At0', 'AtMinus1', 'AtPlus1', 'Mixed'.

    ``problem`` needs ``p`` and ``r`` descriptors.
    """
    p, r = problem.p, problem.r
    if which == "At0":
        return _self_condition(p, r, (("0+", "0+"), ("0-", "0-"), ("0-", "0+"), ("0+", "0-")), which)
    if which == "AtMinus1":
        return _self_condition(p, r, (("-1+", "-1+"),), which)
    if which == "AtPlus1":
        return _self_condition(p, r, (("1-", "1-"),), which)
    if which != "Mixed":
        raise ValueError(f"which must be one of {CONDITIONS}")

    ends = ("-1+", "1-")
    typed = _order_type(p, r, ends)
    nu_m = detect_order(r, "-1+")
    nu_p = detect_order(r, "1-")
    if typed and nu_m == nu_p:
        c1 = connection_witness(p, r, "-1+", "1-", (1.0, 1.0))
        c2 = connection_witness(p, r, "-1+", "1-", (2.0, 1.0))
        ups = mixed_determinant("A", c1, c2)
        if abs(ups) > 1e-6:
            return ConditionVerdict(which, "Satisfied", (c1, c2), "A", "equal-orders", abs(ups))
        found = _mixed_search(p, r)
        if found is not None:
            return found
    flags = structure_flags(p, r)
    if flags.even_p and flags.odd_r:
        plus = check_condition(problem, "AtPlus1")
        if plus.satisfied:
            base = plus.witnesses[0]
            c1 = connection_witness(p, r, "1-", "-1+", (abs(base.alpha_slope), abs(base.beta_slope)))
            c2 = connection_witness(p, r, "1-", "-1+", (1.0, 1.0))
            if c1 is not None and c2 is not None:
                ups = mixed_determinant("B", c1, c2)
                if abs(ups) > 1e-6:
                    return ConditionVerdict(which, "Satisfied", (c1, c2), "B", "even-p-odd-r", abs(ups))
            return ConditionVerdict(which, "Satisfied", (), None, "even-p-odd-r")
        return ConditionVerdict(which, plus.verdict, (), None, "even-p-odd-r")
    if flags.nearly_even_p[0] and flags.nearly_odd_r[0]:
        if typed:
            found = _mixed_search(p, r)
            if found is not None:
                return found
        return ConditionVerdict(which, "Satisfied", (), None, "nearly-even-p-nearly-odd-r")
    if typed and nu_m != nu_p:
        return ConditionVerdict(which, "Violated", (), None, "affine-exhaustion")
    return ConditionVerdict(which, "Unknown", (), None, "outside catalogue")
