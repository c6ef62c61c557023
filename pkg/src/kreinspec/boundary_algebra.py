"""Boundary data (M, N): validation, the Hermitian matrix Delta, and classification.

Columns of M and N act on the boundary vector
``b(f) = (f(-1), f(1), (pf')(-1), (pf')(1))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import herm_eig

Q = 1j * np.array([[0, 0, -1, 0],
                   [0, 0, 0, 1],
                   [1, 0, 0, 0],
                   [0, -1, 0, 0]], dtype=complex)
"""Concomitant matrix: int (l f conj(g) - f conj(l g)) r = i b(g)^* Q b(f)."""

Q_INV = Q  # Q is its own inverse

_ESSENTIAL_TOL = 1e-12


class BoundaryError(Exception):
    """Base class for boundary-data failures."""


class InvalidBoundaryData(BoundaryError):
    """M, N fail the admissibility conditions."""


def _as_bc(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 4):
        raise InvalidBoundaryData(f"{name} must be 2x4, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidBoundaryData(f"{name} has non-finite entries")
    return A


@dataclass(frozen=True)
class ValidationReport:
    nonsingular: bool
    isotropic: bool
    selfadjoint_invertible: bool
    sigma_min_stack: float
    res_MQM: float
    res_NQN: float
    res_selfadjoint: float
    sigma_min_coupling: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.nonsingular and self.isotropic and self.selfadjoint_invertible

    def failures(self) -> list[str]:
        out = []
        if not self.nonsingular:
            out.append("clause 1: stacked [M; N] is singular")
        if not self.isotropic:
            out.append("clause 2: M Q M* or N Q N* is nonzero")
        if not self.selfadjoint_invertible:
            out.append("clause 3: i M Q N* is not self-adjoint and invertible")
        return out

    def to_dict(self) -> dict:
        return {"passed": self.passed, "clause1_nonsingular": self.nonsingular,
                "clause2_isotropic": self.isotropic, "clause3_selfadjoint_invertible": self.selfadjoint_invertible,
                "sigma_min_stack": self.sigma_min_stack, "res_MQM": self.res_MQM, "res_NQN": self.res_NQN,
                "res_selfadjoint": self.res_selfadjoint, "sigma_min_coupling": self.sigma_min_coupling,
                "tol": self.tol}


def validate_boundary_data(M, N, tol: float = 1e-10) -> ValidationReport:
    M = _as_bc(M, "M")
    N = _as_bc(N, "N")
    stack = np.vstack([M, N])
    scale = max(1.0, np.linalg.norm(stack, 2))
    s_stack = np.linalg.svd(stack, compute_uv=False)[-1]
    r_m = np.linalg.norm(M @ Q @ M.conj().T)
    r_n = np.linalg.norm(N @ Q @ N.conj().T)
    G = 1j * M @ Q_INV @ N.conj().T
    r_sa = np.linalg.norm(G - G.conj().T)
    s_G = np.linalg.svd(G, compute_uv=False)[-1]
    return ValidationReport(
        nonsingular=bool(s_stack > tol * scale),
        isotropic=bool(r_m <= tol * scale ** 2 and r_n <= tol * scale ** 2),
        selfadjoint_invertible=bool(r_sa <= tol * scale ** 2 and s_G > tol * scale ** 2),
        sigma_min_stack=float(s_stack), res_MQM=float(r_m), res_NQN=float(r_n),
        res_selfadjoint=float(r_sa), sigma_min_coupling=float(s_G), tol=tol)


@dataclass(frozen=True)
class DeltaInfo:
    delta: np.ndarray
    delta_inv: np.ndarray
    eta11: float
    eta12: complex
    eta22: float
    eta: float
    delta1: float
    delta2: float
    sign_delta: np.ndarray
    abs_delta: np.ndarray
    definiteness: str  # positive | negative | indefinite

    def to_dict(self) -> dict:
        def cm(A):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A, complex)]
        return {"delta": cm(self.delta), "delta_inv": cm(self.delta_inv), "eta": self.eta,
                "delta1": self.delta1, "delta2": self.delta2, "definiteness": self.definiteness,
                "sign_delta": cm(self.sign_delta), "abs_delta": cm(self.abs_delta)}


def _phase_normalize(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        k = int(np.flatnonzero(np.abs(col) > 1e-14)[0])
        V[:, j] = col * (abs(col[k]) / col[k])
    return V


def compute_delta(M, N, tol: float = 1e-10) -> DeltaInfo:
    """Delta = -i (M Q^{-1} N*)^{-1} with its spectral data."""
    rep = validate_boundary_data(M, N, tol)
    if not rep.passed:
        raise InvalidBoundaryData("; ".join(rep.failures()))
    M = _as_bc(M, "M")
    N = _as_bc(N, "N")
    D = -1j * np.linalg.inv(M @ Q_INV @ N.conj().T)
    D = 0.5 * (D + D.conj().T)
    w, V = herm_eig(D, 1e-8)
    V = _phase_normalize(V)
    absw = np.abs(w)
    sign = V @ np.diag(np.sign(w)) @ V.conj().T
    absD = V @ np.diag(absw) @ V.conj().T
    Dinv = np.linalg.inv(D)
    Dinv = 0.5 * (Dinv + Dinv.conj().T)
    eta11 = float(Dinv[0, 0].real)
    eta12 = complex(Dinv[0, 1])
    eta22 = float(Dinv[1, 1].real)
    eta = max(abs(eta11), abs(eta12))
    d1, d2 = sorted(absw)
    if np.all(w > 0):
        kind = "positive"
    elif np.all(w < 0):
        kind = "negative"
    else:
        kind = "indefinite"
    return DeltaInfo(D, Dinv, eta11, eta12, eta22, float(eta), float(d1), float(d2),
                     sign, absD, kind)


@dataclass(frozen=True)
class Classification:
    k: int
    case: str  # a | b | c
    N_e: np.ndarray
    N_n: np.ndarray
    M_red: np.ndarray
    N_red: np.ndarray
    u: Optional[complex] = None
    v: Optional[complex] = None

    @property
    def support(self) -> Optional[str]:
        """'u' (v = 0), 'v' (u = 0) or 'uv' in case b."""
        if self.case != "b":
            return None
        if abs(self.v) < _ESSENTIAL_TOL:
            return "u"
        if abs(self.u) < _ESSENTIAL_TOL:
            return "v"
        return "uv"

    def to_dict(self) -> dict:
        def cm(A):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A, complex)]
        out = {"k": self.k, "case": self.case, "N_e": cm(self.N_e), "N_n": cm(self.N_n)}
        if self.case == "b":
            out["u"] = [float(self.u.real), float(self.u.imag)]
            out["v"] = [float(self.v.real), float(self.v.imag)]
            out["support"] = self.support
        return out


def _echelon_from_bottom_right(A: np.ndarray) -> np.ndarray:
    """Row-reduce a 2-row matrix scanning columns right to left.

    The last row gets its pivot in the rightmost column that has a nonzero
    entry; that column is cleared in the other row; the first row then
    pivots further left.  Pivots are normalised to 1.
    """
    A = A.copy()
    rows = A.shape[0]
    prow = rows - 1
    for col in range(A.shape[1] - 1, -1, -1):
        if prow < 0:
            break
        cand = np.abs(A[: prow + 1, col])
        i = int(np.argmax(cand))
        if cand[i] <= _ESSENTIAL_TOL * max(1.0, np.abs(A).max()):
            continue
        A[[i, prow]] = A[[prow, i]]
        A[prow] = A[prow] / A[prow, col]
        for j in range(rows):
            if j != prow:
                A[j] = A[j] - A[j, col] * A[prow]
        prow -= 1
    return A


def classify(M, N, tol: float = 1e-10) -> Classification:
    """Count essential rows of N (no derivative entries) after joint reduction."""
    rep = validate_boundary_data(M, N, tol)
    if not rep.passed:
        raise InvalidBoundaryData("; ".join(rep.failures()))
    M = _as_bc(M, "M")
    N = _as_bc(N, "N")
    red = _echelon_from_bottom_right(np.hstack([M, N]))
    Mr, Nr = red[:, :4], red[:, 4:]
    deriv = np.abs(Nr[:, 2:]).max(axis=1)
    essential = deriv <= _ESSENTIAL_TOL
    k = int(essential.sum())
    N_e = Nr[essential][:, :2]
    # non-essential rows expressed in the derivative columns
    N_n = Nr[~essential][:, 2:]
    case = {0: "a", 1: "b", 2: "c"}[k]
    u = v = None
    if case == "b":
        row = N_e[0]
        row = row / np.linalg.norm(row)
        k0 = int(np.flatnonzero(np.abs(row) > _ESSENTIAL_TOL)[0])
        row = row * (abs(row[k0]) / row[k0])
        u, v = complex(row[0]), complex(row[1])
        N_e = row[None, :]
    return Classification(k, case, N_e, N_n, Mr, Nr, u, v)


@dataclass(frozen=True)
class FormDomainCase:
    case: str
    u: Optional[complex] = None
    v: Optional[complex] = None
    tol: float = 1e-8

    def contains(self, f_left: complex, f_right: complex, w) -> bool:
        """Membership of (f; w) given the traces f(-1), f(1)."""
        w = np.asarray(w, complex)
        scale = 1.0 + max(abs(f_left), abs(f_right), float(np.max(np.abs(w))))
        if self.case == "a":
            return True
        if self.case == "b":
            return abs(w[0] - (self.u * f_left + self.v * f_right)) <= self.tol * scale
        return bool(np.max(np.abs(w - np.array([f_left, f_right]))) <= self.tol * scale)

    def residual(self, f_left: complex, f_right: complex, w) -> float:
        w = np.asarray(w, complex)
        if self.case == "a":
            return 0.0
        if self.case == "b":
            return float(abs(w[0] - (self.u * f_left + self.v * f_right)))
        return float(np.max(np.abs(w - np.array([f_left, f_right]))))


def form_domain_predicate(classification: Classification, tol: float = 1e-8) -> FormDomainCase:
    return FormDomainCase(classification.case, classification.u, classification.v, tol)
