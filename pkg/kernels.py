"""
Hot loops: orbit accumulation, cocycle growth and Sturm counts.

The kernels are plain Python over numpy arrays. When numba is installed they
are compiled (nogil, cached); otherwise the regular Python versions run.
"""

import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False
    logger.debug("numba not available, kernels run as plain Python. Install with: pip install numba")


def jit(func):
    """Compile with numba when available, else return the function unchanged."""
    if NUMBA_AVAILABLE:
        return numba.njit(cache=True, nogil=True)(func)
    return func


@jit
def orbit_points(x0, alpha, length):
    """
    Points x0 + n*alpha mod 1 for n = 0 .. length-1.

    Iterated Kahan-compensated addition reduced mod 1 each step; subtracting 1
    from a value in [1, 2) is exact, so the only rounding is in the sum.
    """
    out = np.empty(length)
    x = x0
    comp = 0.0
    for k in range(length):
        out[k] = x
        y = alpha - comp
        t = x + y
        comp = (t - x) - y
        x = t
        if x >= 1.0:
            x -= 1.0
        elif x < 0.0:
            x += 1.0
    return out


@jit
def cocycle_log_growth(a, b, z, threshold):
    """
    Log growth increments of the renormalized product B_n ... B_1.

    a, b hold a_0 .. a_steps and b_0 .. b_steps; step n uses a_{n-1}, a_n, b_n.
    The running product is divided by its max-abs entry after every step and
    the log of that scale is the increment. Steps with |a_n| <= threshold are
    skipped (identity, increment 0) and flagged.
    """
    steps = a.shape[0] - 1
    increments = np.zeros(steps)
    skipped = np.zeros(steps, dtype=np.bool_)
    p00 = 1.0 + 0.0j
    p01 = 0.0 + 0.0j
    p10 = 0.0 + 0.0j
    p11 = 1.0 + 0.0j
    for k in range(steps):
        a_cur = a[k + 1]
        if abs(a_cur) <= threshold:
            skipped[k] = True
            continue
        inv = 1.0 / a_cur
        m00 = (b[k + 1] - z) * inv
        m01 = -np.conj(a[k]) * inv
        # second row of B_n is (1, 0)
        q00 = m00 * p00 + m01 * p10
        q01 = m00 * p01 + m01 * p11
        q10 = p00
        q11 = p01
        scale = max(max(abs(q00), abs(q01)), max(abs(q10), abs(q11)))
        if scale == 0.0:
            increments[k] = -np.inf
            break
        p00 = q00 / scale
        p01 = q01 / scale
        p10 = q10 / scale
        p11 = q11 / scale
        increments[k] = math.log(scale)
    return increments, skipped


@jit
def riccati_down(abs2_a, b, z, limit):
    """
    Downward Riccati sweep m_{k-1} = 1 / ((b_k - z) - |a_k|^2 m_k) seeded with 0.

    Inputs hold sites s .. s+L-1; out[j] is m_{s+j-1}. Returns (out, ok) with
    ok False if a denominator fell below limit in modulus.
    """
    length = b.shape[0]
    out = np.empty(length, dtype=np.complex128)
    m = 0.0 + 0.0j
    for j in range(length - 1, -1, -1):
        den = (b[j] - z) - abs2_a[j] * m
        if abs(den) < limit:
            return out, False
        m = 1.0 / den
        out[j] = m
    return out, True


@jit
def riccati_up(abs2_a_prev, b, z, limit):
    """
    Upward Riccati sweep m_{k+1} = 1 / ((b_k - z) - |a_{k-1}|^2 m_k) seeded with 0.

    Inputs hold sites s .. s+L-1 (abs2_a_prev[j] = |a_{s+j-1}|^2); out[j] is m_{s+j+1}.
    """
    length = b.shape[0]
    out = np.empty(length, dtype=np.complex128)
    m = 0.0 + 0.0j
    for j in range(length):
        den = (b[j] - z) - abs2_a_prev[j] * m
        if abs(den) < limit:
            return out, False
        m = 1.0 / den
        out[j] = m
    return out, True


def riccati_down_stacked(abs2_a, b, z, limit):
    """riccati_down across the leading axis of (P, L) arrays; returns m_{s-1} per row."""
    m = np.zeros(b.shape[0], dtype=complex)
    for j in range(b.shape[1] - 1, -1, -1):
        den = (b[:, j] - z) - abs2_a[:, j] * m
        if np.any(np.abs(den) < limit):
            return m, False
        m = 1.0 / den
    return m, True


@jit
def sturm_count(diag, off2, x, pivmin):
    """Number of eigenvalues below x of the real symmetric tridiagonal (diag, sqrt(off2))."""
    count = 0
    q = diag[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        count += 1
    for k in range(1, diag.shape[0]):
        q = (diag[k] - x) - off2[k - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            count += 1
    return count


def sturm_counts(diag, off2, shifts, pivmin):
    """Vectorized Sturm counts for many shifts at once."""
    shifts = np.asarray(shifts, dtype=float)
    q = diag[0] - shifts
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0.0).astype(np.int64)
    for k in range(1, diag.shape[0]):
        q = (diag[k] - shifts) - off2[k - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0.0
    return count


def bisect_all(diag, off2, lower, upper, tol, pivmin):
    """
    Bisect every eigenvalue bracket simultaneously.

    Eigenvalue k (ascending) is kept in [lo_k, hi_k] with
    count(lo_k) <= k < count(hi_k), starting from the Gerschgorin interval.
    """
    n = diag.shape[0]
    lo = np.full(n, lower)
    hi = np.full(n, upper)
    target = np.arange(n)
    iterations = max(1, int(math.ceil(math.log2(max(upper - lower, tol) / tol))) + 1)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        counts = sturm_counts(diag, off2, mid, pivmin)
        above = counts > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= tol):
            break
    return 0.5 * (lo + hi)
