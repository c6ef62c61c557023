"""Finite-section Riesz diagnostics and the hypothesis dispatcher.

Root vectors are embedded as (f; N b(f)) on a grid, normalised in the Hilbert
majorant and assembled into Gram matrices.  Bounded extreme eigenvalues over
growing sections are the observable surrogate for a Riesz basis; the
dispatcher separately reports whether the structural hypotheses guarantee one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coefficients import check_condition
from .krein_space import SpaceElement, gram_weights
from .numerics import Grid, herm_eig
from .spectral_solver import find_real_eigenvalues, root_chains, root_vector_embed
from .w_construction import ROUTE_CONDITIONS, route_for


class RieszError(Exception):
    """Base class for diagnostics failures."""


class NotNormalized(RieszError):
    """A vector handed to the Gram assembly does not have unit majorant norm."""


class NotEnoughVectors(RieszError):
    """Fewer root vectors than requested could be collected."""


# ---------------------------------------------------------------------------
# Gram matrices

def _stack(vectors: Sequence[SpaceElement]) -> np.ndarray:
    return np.stack([v.stacked() for v in vectors], axis=1)


def _weights(grid: Grid, problem, kind: str) -> tuple[np.ndarray, np.ndarray]:
    return gram_weights(grid, problem, kind)


def pairing_matrix(vectors: Sequence[SpaceElement], problem, kind: str = "hilbert") -> np.ndarray:
    """G[i, j] = (x_j, x_i) in the chosen inner product."""
    if not vectors:
        return np.zeros((0, 0), complex)
    grid = vectors[0].grid
    w, B = _weights(grid, problem, kind)
    V = _stack(vectors)
    n = grid.size
    F, U = V[:n], V[n:]
    return (F.conj().T * w[None, :]) @ F + U.conj().T @ B @ U


def gram_matrix(vectors: Sequence[SpaceElement], problem, N: Optional[int] = None,
                tol: float = 1e-8) -> np.ndarray:
    """Hermitian N x N Gram matrix of majorant-normalised vectors."""
    vecs = list(vectors[:N] if N is not None else vectors)
    G = pairing_matrix(vecs, problem, "hilbert")
    diag = np.real(np.diag(G))
    bad = np.flatnonzero(np.abs(diag - 1.0) > tol)
    if bad.size:
        raise NotNormalized(f"vector {int(bad[0])} has squared norm {diag[bad[0]]:.6g}")
    return 0.5 * (G + G.conj().T)


@dataclass(frozen=True)
class GramEntry:
    N: int
    lam_min: float
    lam_max: float

    @property
    def ratio(self) -> float:
        return self.lam_max / self.lam_min if self.lam_min > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"N": self.N, "lam_min": self.lam_min, "lam_max": self.lam_max, "ratio": self.ratio}


@dataclass(frozen=True)
class GramReport:
    entries: tuple

    @property
    def final(self) -> GramEntry:
        return self.entries[-1]

    @property
    def N(self) -> int:
        return self.final.N

    @property
    def lam_min(self) -> float:
        return self.final.lam_min

    @property
    def lam_max(self) -> float:
        return self.final.lam_max

    @property
    def ratio(self) -> float:
        return self.final.ratio

    @property
    def plateau(self) -> float:
        """ratio(N) / ratio(N/2) for the last two sections (1.0 with one section)."""
        if len(self.entries) < 2:
            return 1.0
        prev = self.entries[-2].ratio
        return self.final.ratio / prev if np.isfinite(prev) else float("inf")

    def to_dict(self) -> dict:
        return {"sections": [e.to_dict() for e in self.entries], "plateau": self.plateau}


def riesz_ratio(vectors: Sequence[SpaceElement], problem, sizes: Sequence[int] = (10, 20, 40)) -> GramReport:
    """Extreme Gram eigenvalues over nested sections."""
    if len(vectors) < min(sizes):
        raise NotEnoughVectors(f"need at least {min(sizes)} vectors, have {len(vectors)}")
    G = gram_matrix(vectors, problem, max(s for s in sizes if s <= len(vectors)))
    entries = []
    for N in sizes:
        if N > len(vectors):
            break
        w, _ = herm_eig(G[:N, :N], 1e-8)
        entries.append(GramEntry(N, float(w[0]), float(w[-1])))
    return GramReport(tuple(entries))


# ---------------------------------------------------------------------------
# collecting root vectors

@dataclass(frozen=True, eq=False)
class RootGroup:
    """Orthonormalised root vectors at one eigenvalue."""

    lam: complex
    vectors: tuple
    chain_lengths: tuple

    def to_dict(self) -> dict:
        return {"lambda": [float(self.lam.real), float(self.lam.imag)], "count": len(self.vectors),
                "chain_lengths": list(self.chain_lengths)}


def orthonormalize(vectors: Sequence[SpaceElement], problem, tol: float = 1e-10) -> list[SpaceElement]:
    """Gram-Schmidt (twice) in the majorant; drops numerically dependent vectors."""
    out: list[SpaceElement] = []
    if not vectors:
        return out
    grid = vectors[0].grid
    w, B = _weights(grid, problem, "hilbert")
    n = grid.size

    def ip(a, b):
        return np.sum(w * a[:n] * np.conj(b[:n])) + np.conj(b[n:]) @ B @ a[n:]

    basis = []
    for v in vectors:
        x = v.stacked().copy()
        norm0 = np.sqrt(abs(ip(x, x)))
        for _ in range(2):
            for e in basis:
                x = x - ip(x, e) * e
        nx = np.sqrt(abs(ip(x, x)))
        if nx <= tol * max(norm0, 1e-300):
            continue
        x = x / nx
        basis.append(x)
        out.append(SpaceElement(grid, x[:n], x[n:]))
    return out


def collect_root_vectors(problem, count: int, grid: Optional[Grid] = None, start: float = 400.0,
                         density: float = 8.0, max_window: float = 1e6) -> list[RootGroup]:
    """Root-vector groups for the ``count`` real eigenvalues of smallest modulus.

    The scan window grows by doubling until enough eigenvalues are inside.
    """
    grid = grid or problem.grid()
    L = float(start)
    while True:
        roots = find_real_eigenvalues(problem, (-L, L), density=density)
        if len(roots) >= count + 2 or L >= max_window:
            break
        L *= 2.0
    lams = sorted((rt.lam for rt in roots), key=lambda z: (abs(z), z))
    if len(lams) < count:
        raise NotEnoughVectors(f"only {len(lams)} eigenvalues in [-{L:g}, {L:g}]")
    groups = []
    for lam in lams[:count]:
        chains = root_chains(problem, lam)
        raw = [v for ch in chains for v in root_vector_embed(ch, problem, grid)]
        vecs = orthonormalize(raw, problem)
        groups.append(RootGroup(complex(lam), tuple(vecs), tuple(ch.length for ch in chains)))
    return groups


def flatten(groups: Sequence[RootGroup]) -> list[SpaceElement]:
    return [v for g in groups for v in g.vectors]


# ---------------------------------------------------------------------------
# J-orthogonality

@dataclass(frozen=True)
class JOrthogonalityReport:
    max_residual: float
    pair: Optional[tuple]
    n_groups: int

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "pair": list(self.pair) if self.pair else None,
                "n_groups": self.n_groups}


def j_orthogonality_report(groups: Sequence[RootGroup], problem) -> JOrthogonalityReport:
    """max |[x_i, x_j]| / (|x_i| |x_j|) over vectors at distinct eigenvalues."""
    vecs, owner = [], []
    for k, g in enumerate(groups):
        vecs.extend(g.vectors)
        owner.extend([k] * len(g.vectors))
    if len(groups) < 2:
        return JOrthogonalityReport(0.0, None, len(groups))
    K = pairing_matrix(vecs, problem, "krein")
    H = pairing_matrix(vecs, problem, "hilbert")
    norms = np.sqrt(np.abs(np.real(np.diag(H))))
    R = np.abs(K) / np.outer(norms, norms)
    owner = np.asarray(owner)
    R[owner[:, None] == owner[None, :]] = 0.0
    i, j = np.unravel_index(int(np.argmax(R)), R.shape)
    pair = (int(owner[i]), int(owner[j]))
    return JOrthogonalityReport(float(R[i, j]), pair, len(groups))


# ---------------------------------------------------------------------------
# hypothesis dispatcher

@dataclass(frozen=True)
class HypothesisReport:
    route: str
    k: int
    definiteness: str
    support: Optional[str]
    verdicts: dict
    structural: dict = field(default_factory=dict)

    @property
    def conclusion(self) -> str:
        ok = all(v == "Satisfied" for v in self.verdicts.values()) and all(self.structural.values())
        return "RieszBasisGuaranteed" if ok else "NoConclusion"

    def to_dict(self) -> dict:
        return {"route": self.route, "k": self.k, "definiteness": self.definiteness,
                "support": self.support, "verdicts": dict(self.verdicts),
                "structural": dict(self.structural), "conclusion": self.conclusion}


def hypothesis_report(problem) -> HypothesisReport:
    """Which positive-operator route applies, and whether its conditions hold."""
    cls = problem.classification
    route = route_for(problem)
    verdicts = {w: check_condition(problem, w).verdict for w in ROUTE_CONDITIONS[route]}
    structural = {}
    if cls.k == 0:
        structural["derivative_rows_identity"] = bool(np.allclose(cls.N_n, np.eye(2), atol=1e-10))
    return HypothesisReport(route, cls.k, problem.delta_info.definiteness, cls.support, verdicts, structural)


# ---------------------------------------------------------------------------
# combined run

@dataclass(frozen=True, eq=False)
class RieszRun:
    groups: tuple
    gram: GramReport
    j_orth: JOrthogonalityReport
    hypothesis: HypothesisReport

    @property
    def empirically_consistent(self) -> bool:
        """Artifact thresholds: plateau <= 1.5 and lam_min >= 1e-3."""
        return self.gram.plateau <= 1.5 and self.gram.lam_min >= 1e-3

    def to_dict(self) -> dict:
        return {"hypothesis": self.hypothesis.to_dict(), "gram": self.gram.to_dict(),
                "j_orthogonality": self.j_orth.to_dict(),
                "eigenvalues": [g.to_dict() for g in self.groups],
                "empirically_consistent": self.empirically_consistent,
                "thresholds": {"plateau": 1.5, "lam_min": 1e-3, "note": "artifact conventions"}}


def riesz_run(problem, nmax: int = 40, grid: Optional[Grid] = None) -> RieszRun:
    sizes = tuple(s for s in (10, 20, 40, 80, 160) if s <= nmax) or (nmax,)
    if sizes[-1] != nmax:
        sizes = sizes + (nmax,)
    # every eigenvalue contributes at least one vector, so nmax eigenvalues suffice
    groups = collect_root_vectors(problem, nmax, grid)
    vecs = flatten(groups)[:nmax]
    gram = riesz_ratio(vecs, problem, sizes)
    return RieszRun(tuple(groups), gram, j_orthogonality_report(groups, problem), hypothesis_report(problem))
