"""Hot loops for the shooting solver.

Gauss-Legendre collocation propagation of the linear system

    y' = A(x, lam) y,   y = (f_0, (p f_0)', f_1, (p f_1)', ...)

where each (f, pf') pair obeys f' = pf'/p, (pf')' = (q - lam r) f - r f_prev.
The chain coupling ``-r f_prev`` is what turns the same kernel into a
Jordan-chain / lambda-derivative propagator.

Coefficients arrive packed as flat arrays (see ``coefficients.pack``) so the
kernels stay numba friendly.  With ``KREINSPEC_NO_NUMBA=1`` the very same
Python functions run uncompiled on numpy.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("KREINSPEC_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLE:
        raise ImportError
    from numba import njit as _njit

    def jit(fn):
        return _njit(cache=True, nogil=True)(fn)

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised through the env flag
    def jit(fn):
        return fn

    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

STAGES = 5
ORDER = 2 * STAGES

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_BUFFER_FULL = 2


def _collocation_tableau(s: int):
    x, w = np.polynomial.legendre.leggauss(s)
    c = 0.5 * (x + 1.0)
    b = 0.5 * w
    # a_ij = int_0^{c_i} l_j(t) dt with l_j the Lagrange basis on c
    V = np.vander(c, s, increasing=True)  # V[i, k] = c_i^k
    coef = np.linalg.inv(V)  # column j holds monomial coefficients of l_j
    powers = np.arange(1, s + 1)
    integ = c[:, None] ** powers[None, :] / powers[None, :]  # int_0^{c_i} t^k
    a = integ @ coef
    return c, a, b


GL_C, GL_A, GL_B = _collocation_tableau(STAGES)


@jit
def coef_eval(x, lo, hi, sg, an, nu, pc):
    """Value of a packed piecewise ``sign * |x - anchor|^nu * poly(x)``."""
    n = lo.shape[0]
    k = 0
    while k < n - 1 and x >= hi[k]:
        k += 1
    v = 0.0
    for j in range(pc.shape[1] - 1, -1, -1):
        v = v * x + pc[k, j]
    if nu[k] != 0.0:
        v *= abs(x - an[k]) ** nu[k]
    return sg[k] * v


@jit
def _system(x, lam, m, P, Q, R, out):
    """Fill ``out`` with A(x, lam) for a chain of depth m (size 2(m+1))."""
    inv_p = 1.0 / coef_eval(x, P[0], P[1], P[2], P[3], P[4], P[5])
    qv = coef_eval(x, Q[0], Q[1], Q[2], Q[3], Q[4], Q[5])
    rv = coef_eval(x, R[0], R[1], R[2], R[3], R[4], R[5])
    out[:, :] = 0.0
    for k in range(m + 1):
        out[2 * k, 2 * k + 1] = inv_p
        out[2 * k + 1, 2 * k] = qv - lam * rv
        if k > 0:
            out[2 * k + 1, 2 * k - 2] = -rv


@jit
def gl_step(x0, h, lam, m, P, Q, R, gc, ga, gb):
    """One collocation step; returns the step propagator (n x n)."""
    n = 2 * (m + 1)
    s = gc.shape[0]
    big = np.zeros((s * n, s * n), dtype=np.complex128)
    rhs = np.zeros((s * n, n), dtype=np.complex128)
    Ai = np.zeros((n, n), dtype=np.complex128)
    for i in range(s):
        _system(x0 + gc[i] * h, lam, m, P, Q, R, Ai)
        for r in range(n):
            big[i * n + r, i * n + r] += 1.0
            for c in range(n):
                rhs[i * n + r, c] = Ai[r, c]
                for j in range(s):
                    big[i * n + r, j * n + c] -= h * ga[i, j] * Ai[r, c]
    K = np.linalg.solve(big, rhs)
    step = np.eye(n, dtype=np.complex128)
    for i in range(s):
        for r in range(n):
            for c in range(n):
                step[r, c] += h * gb[i] * K[i * n + r, c]
    return step


@jit
def propagate(x0, x1, lam, m, P, Q, R, breaks, rtol, atol, h_init, h_min,
              gc, ga, gb, rec_x, rec_Y):
    """Fundamental matrix from x0 to x1 (x1 > x0) by adaptive step doubling.

    Steps never cross an entry of ``breaks``.  When ``rec_x`` is non-empty the
    accepted step starts and the matrix at each start are recorded (dense
    output is then a single short step from the nearest record).

    Returns (Y, n_records, status).
    """
    n = 2 * (m + 1)
    Y = np.eye(n, dtype=np.complex128)
    cap = rec_x.shape[0]
    nrec = 0
    h = h_init
    a = x0
    # segment boundaries strictly inside (x0, x1)
    nb = 0
    for k in range(breaks.shape[0]):
        if breaks[k] > x0 and breaks[k] < x1:
            nb += 1
    seg = np.empty(nb + 2)
    seg[0] = x0
    j = 1
    for k in range(breaks.shape[0]):
        if breaks[k] > x0 and breaks[k] < x1:
            seg[j] = breaks[k]
            j += 1
    seg[nb + 1] = x1
    # breaks are assumed sorted
    for si in range(nb + 1):
        a = seg[si]
        b = seg[si + 1]
        while b - a > 1e-15 * (1.0 + abs(b)):
            last = False
            hh = h
            if a + hh >= b - 1e-14 * (1.0 + abs(b)):
                hh = b - a
                last = True
            full = gl_step(a, hh, lam, m, P, Q, R, gc, ga, gb)
            half1 = gl_step(a, 0.5 * hh, lam, m, P, Q, R, gc, ga, gb)
            half2 = gl_step(a + 0.5 * hh, 0.5 * hh, lam, m, P, Q, R, gc, ga, gb)
            fine = half2 @ half1
            err = 0.0
            scale = 0.0
            for r in range(n):
                for c in range(n):
                    d = abs(fine[r, c] - full[r, c])
                    if d > err:
                        err = d
                    if abs(fine[r, c]) > scale:
                        scale = abs(fine[r, c])
            ratio = err / (atol + rtol * scale)
            if ratio <= 1.0:
                if cap > 0:
                    if nrec >= cap:
                        return Y, nrec, STATUS_BUFFER_FULL
                    rec_x[nrec] = a
                    rec_Y[nrec, :, :] = Y
                    nrec += 1
                Y = fine @ Y
                if last:
                    a = b
                else:
                    a = a + hh
                if ratio < 1e-300:
                    fac = 4.0
                else:
                    fac = 0.9 * ratio ** (-1.0 / (ORDER + 1))
                    if fac > 4.0:
                        fac = 4.0
                    if fac < 0.2:
                        fac = 0.2
                if not last:
                    h = hh * fac
                else:
                    h = max(h, hh * fac)
            else:
                fac = 0.9 * ratio ** (-1.0 / (ORDER + 1))
                if fac < 0.1:
                    fac = 0.1
                if fac > 0.5:
                    fac = 0.5
                h = hh * fac
                if h < h_min:
                    return Y, nrec, STATUS_UNDERFLOW
    if cap > 0:
        if nrec >= cap:
            return Y, nrec, STATUS_BUFFER_FULL
        rec_x[nrec] = x1
        rec_Y[nrec, :, :] = Y
        nrec += 1
    return Y, nrec, STATUS_OK


@jit
def propagate_many(lams, x0, x1, m, P, Q, R, breaks, rtol, atol, h_init, h_min,
                   gc, ga, gb, out, status):
    """Batch of ``propagate`` over an array of lambda values."""
    empty_x = np.empty(0)
    empty_Y = np.empty((0, 2 * (m + 1), 2 * (m + 1)), dtype=np.complex128)
    for i in range(lams.shape[0]):
        Y, _, st = propagate(x0, x1, lams[i], m, P, Q, R, breaks, rtol, atol,
                             h_init, h_min, gc, ga, gb, empty_x, empty_Y)
        out[i, :, :] = Y
        status[i] = st


@jit
def kernel_matrix(x, t, u, v, omega_x, omega_t):
    """Samples of the rank-structured Hermitian kernel on x (rows) by t (cols).

    ``omega_x``/``omega_t`` are the profile function sampled at x and t.
    """
    nx = x.shape[0]
    nt = t.shape[0]
    out = np.empty((nx, nt), dtype=np.complex128)
    uc = np.conj(u)
    vc = np.conj(v)
    for i in range(nx):
        xi = x[i]
        for j in range(nt):
            tj = t[j]
            if tj <= -abs(xi):
                out[i, j] = np.conj(uc * omega_x[i])
            elif xi > abs(tj):
                out[i, j] = vc * omega_t[j]
            elif tj >= abs(xi):
                out[i, j] = np.conj(vc * omega_x[i])
            else:
                out[i, j] = uc * omega_t[j]
    return out


def kernel_matrix_vectorized(x, t, u, v, omega_x, omega_t):
    """Numpy twin of ``kernel_matrix`` (same case order)."""
    X = np.asarray(x, float)[:, None]
    T = np.asarray(t, float)[None, :]
    ox = np.asarray(omega_x, complex)[:, None]
    ot = np.asarray(omega_t, complex)[None, :]
    out = np.conj(np.conj(u) * ox) * np.ones_like(T)
    out = np.where(T <= -np.abs(X), out,
                   np.where(X > np.abs(T), np.conj(v) * ot,
                            np.where(T >= np.abs(X), np.conj(np.conj(v) * ox), np.conj(u) * ot)))
    return out


def kernel_samples(x, t, u, v, omega_x, omega_t):
    """Kernel samples through whichever backend is active."""
    if HAVE_NUMBA:
        return kernel_matrix(np.asarray(x, float), np.asarray(t, float), complex(u), complex(v),
                             np.asarray(omega_x, complex), np.asarray(omega_t, complex))
    return kernel_matrix_vectorized(x, t, u, v, omega_x, omega_t)
