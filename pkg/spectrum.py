"""
Finite truncations of the Jacobi operator: gauge reduction to real form,
Sturm-sequence eigenvalues, density of states and spectrum samples.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from batch import gather_bounded, raise_first
from config import DEFAULT_BINS, DOS_MARGIN, EIGEN_TOL, EIGENSOLVERS
from errors import DomainError
from kernels import bisect_all, sturm_count as _sturm_count
from model import JacobiFamily

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TridiagonalOperator:
    """Dirichlet truncation: diag b_n (real), offdiag a_n (complex); sub-diagonal is conj(offdiag)."""
    diag: np.ndarray
    offdiag: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        if self.diag.ndim != 1 or self.diag.shape[0] < 1:
            raise DomainError("diagonal must be a nonempty 1-d array")
        if self.offdiag.shape[0] != self.diag.shape[0] - 1:
            raise DomainError(
                f"offdiag length {self.offdiag.shape[0]} must be one less than diag length {self.diag.shape[0]}"
            )

    def __len__(self) -> int:
        return self.diag.shape[0]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.offdiag) or bool(np.all(self.offdiag.imag == 0.0))

    def dense(self) -> np.ndarray:
        """Dense Hermitian matrix (small N only)."""
        h = np.diag(self.diag.astype(complex))
        h += np.diag(self.offdiag.astype(complex), 1)
        h += np.diag(np.conj(self.offdiag.astype(complex)), -1)
        return h

    def gerschgorin(self) -> Tuple[float, float]:
        radius = np.zeros(len(self))
        mod = np.abs(self.offdiag)
        radius[:-1] += mod
        radius[1:] += mod
        return float(np.min(self.diag - radius)), float(np.max(self.diag + radius))


@dataclass(frozen=True)
class GaugeResult:
    """Real operator, unit phases phi with D* H D real (D = diag(phi)), and decoupled blocks."""
    operator: TridiagonalOperator
    phases: np.ndarray
    blocks: Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class DosEstimate:
    """Pooled eigenvalues of M phase truncations of size N, each with weight 1/(N M)."""
    eigenvalues: np.ndarray
    bin_edges: np.ndarray
    masses: np.ndarray
    N: int
    M: int


def truncate(model: JacobiFamily, N: int, start: int = 0) -> TridiagonalOperator:
    """Dirichlet section on sites start .. start+N-1."""
    if N < 1:
        raise DomainError(f"truncation size must be positive, got {N}")
    window = model.window(start, N)
    return TridiagonalOperator(window.b.astype(float), window.a[:-1].copy(), start)


def gauge_to_real(op: TridiagonalOperator) -> GaugeResult:
    """
    Conjugate by a diagonal unitary so every off-diagonal becomes |a_n|.

    phi_{n+1} = phi_n conj(a_n)/|a_n|; a zero off-diagonal splits the operator
    and the phase restarts at 1 on the next block.
    """
    n = len(op)
    phases = np.ones(n, dtype=complex)
    mod = np.abs(op.offdiag)
    blocks: List[Tuple[int, int]] = []
    block_start = 0
    for k in range(n - 1):
        if mod[k] == 0.0:
            blocks.append((block_start, k))
            block_start = k + 1
            phases[k + 1] = 1.0
        else:
            phases[k + 1] = phases[k] * np.conj(op.offdiag[k]) / mod[k]
    blocks.append((block_start, n - 1))
    if len(blocks) > 1:
        logger.debug(f"Gauge split operator of size {n} into {len(blocks)} blocks")
    real = TridiagonalOperator(op.diag.astype(float), mod.astype(float), op.start_index)
    return GaugeResult(real, phases, tuple(blocks))


def _pivmin(op: TridiagonalOperator) -> float:
    scale = max(float(np.max(np.abs(op.diag))), float(np.max(np.abs(op.offdiag))) if len(op) > 1 else 0.0, 1.0)
    return np.finfo(float).tiny / np.finfo(float).eps * scale * scale


def sturm_count(op: TridiagonalOperator, x: float) -> int:
    """Number of eigenvalues of a real symmetric truncation strictly below x."""
    if not op.is_real:
        raise DomainError("Sturm count needs a real off-diagonal; call gauge_to_real first")
    off2 = np.square(np.real(op.offdiag).astype(float))
    return int(_sturm_count(op.diag.astype(float), off2, float(x), _pivmin(op)))


def multiplicity_profile(eigenvalues: np.ndarray, tol: float = EIGEN_TOL) -> int:
    """Largest number of eigenvalues that fall within tol of each other (1 = all simple at this resolution)."""
    if eigenvalues.shape[0] < 2:
        return int(eigenvalues.shape[0])
    breaks = np.flatnonzero(np.diff(eigenvalues) > tol)
    edges = np.concatenate(([-1], breaks, [eigenvalues.shape[0] - 1]))
    return int(np.max(np.diff(edges)))


def eigenvalues_sturm(op: TridiagonalOperator, tol: float = EIGEN_TOL, method: str = "bisect") -> np.ndarray:
    """
    All eigenvalues of a real symmetric truncation, ascending, to absolute accuracy tol.

    "bisect" runs simultaneous bisection on Sturm counts from the Gerschgorin
    interval; "lapack" calls LAPACK's Sturm bisection (stebz).
    """
    if not op.is_real:
        raise DomainError("eigenvalues_sturm needs a real off-diagonal; call gauge_to_real first")
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    diag = op.diag.astype(float)
    off = np.real(op.offdiag).astype(float)
    if len(op) == 1:
        return diag.copy()
    if method == "bisect":
        lower, upper = op.gerschgorin()
        pad = tol + 1e-12 * max(abs(lower), abs(upper), 1.0)
        values = bisect_all(diag, np.square(off), lower - pad, upper + pad, tol, _pivmin(op))
    elif method == "lapack":
        values = eigvalsh_tridiagonal(diag, off, lapack_driver="stebz", tol=tol)
    else:
        raise DomainError(f"unknown eigensolver {method!r}, expected one of {EIGENSOLVERS}")
    values = np.sort(values)

    if np.all(off != 0.0):
        # an unbroken Jacobi matrix has simple spectrum; clusters here are below solver resolution
        multiplicity = multiplicity_profile(values, tol)
        if multiplicity > 1:
            logger.debug(
                f"{multiplicity} eigenvalues of an unbroken size-{len(op)} truncation agree within {tol:.1e}"
            )
    return values


def _phase_eigenvalues(model: JacobiFamily, N: int, theta: float, method: str, tol: float) -> np.ndarray:
    op = gauge_to_real(truncate(model.with_phase(theta), N)).operator
    return eigenvalues_sturm(op, tol, method)


def pooled_eigenvalues(
    model: JacobiFamily,
    N: int,
    M: int,
    method: str = "lapack",
    tol: float = EIGEN_TOL,
    max_concurrent: Optional[int] = None,
) -> np.ndarray:
    """Sorted pool of the eigenvalues of truncations at phases j/M, j = 0 .. M-1."""
    if N < 1 or M < 1:
        raise DomainError(f"N and M must be positive, got N={N}, M={M}")
    phases = [j / M for j in range(M)]
    results = gather_bounded(lambda theta: _phase_eigenvalues(model, N, theta, method, tol), phases, max_concurrent)
    return np.sort(np.concatenate(raise_first(results)), kind="mergesort")


def dos_estimate(
    model: JacobiFamily,
    N: int,
    M: int,
    bins: int = DEFAULT_BINS,
    method: str = "lapack",
    max_concurrent: Optional[int] = None,
) -> DosEstimate:
    """Density of states from M phase truncations of size N, with a histogram over the pooled range."""
    if bins < 1:
        raise DomainError(f"bin count must be positive, got {bins}")
    pool = pooled_eigenvalues(model, N, M, method, max_concurrent=max_concurrent)
    counts, edges = np.histogram(pool, bins=bins, range=(pool[0] - DOS_MARGIN, pool[-1] + DOS_MARGIN))
    masses = counts / pool.shape[0]
    logger.info(f"DOS pooled {pool.shape[0]} eigenvalues (N={N}, M={M}) over [{pool[0]:.4f}, {pool[-1]:.4f}]")
    return DosEstimate(pool, edges, masses, N, M)


def dos_cdf(dos: DosEstimate, E: float) -> float:
    """Fraction of pooled eigenvalues <= E (right-continuous)."""
    return float(np.searchsorted(dos.eigenvalues, E, side="right") / dos.eigenvalues.shape[0])


def kolmogorov_distance(pool_a: np.ndarray, pool_b: np.ndarray) -> float:
    """sup_E |F_a(E) - F_b(E)| for the empirical CDFs of two sorted pools (exact)."""
    points = np.union1d(pool_a, pool_b)
    dist = 0.0
    for side in ("right", "left"):
        fa = np.searchsorted(pool_a, points, side=side) / pool_a.shape[0]
        fb = np.searchsorted(pool_b, points, side=side) / pool_b.shape[0]
        dist = max(dist, float(np.max(np.abs(fa - fb))))
    return dist


def spectrum_samples(
    model: JacobiFamily, N: int, M: int, count: int, method: str = "lapack"
) -> np.ndarray:
    """`count` pooled truncation eigenvalues drawn evenly by rank (rank floor((i + 1/2) NM / count))."""
    total = N * M
    if not 1 <= count <= total:
        raise DomainError(f"count must lie in [1, {total}], got {count}")
    pool = pooled_eigenvalues(model, N, M, method)
    ranks = np.floor((np.arange(count) + 0.5) * total / count).astype(int)
    return pool[ranks]
