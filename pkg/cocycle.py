"""
Transfer-matrix cocycle: one-step matrices, Lyapunov exponent estimation,
solution propagation and Wronskians.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from batch import gather_bounded
from config import EPSILON_LADDER, LE_BLOCKS, LE_CLAMP_WARN, MAX_SKIP_FRACTION, SINGULAR_THRESHOLD
from errors import DegenerateOrbitError, DomainError, HarperError, SingularStepError
from kernels import cocycle_log_growth
from model import CoefficientWindow, JacobiFamily

logger = logging.getLogger(__name__)

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class TransferMatrix:
    """
    2x2 complex one-step matrix of the cocycle.

    Maps (phi_n, phi_{n-1}) to (phi_{n+1}, phi_n) where phi_n = (-1)^n psi_n
    and psi solves H psi = z psi.
    """
    entries: np.ndarray

    def det(self) -> complex:
        e = self.entries
        return complex(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])

    def apply(self, psi_n: complex, psi_prev: complex) -> Tuple[complex, complex]:
        out = self.entries @ np.array([psi_n, psi_prev], dtype=complex)
        return complex(out[0]), complex(out[1])


@dataclass(frozen=True)
class CocycleResult:
    """Lyapunov exponent estimate with block standard error."""
    le_estimate: float
    steps: int
    stderr_estimate: float
    raw_estimate: float
    skipped: int = 0
    log_growth_trace: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SolutionWindow:
    """Values of a solution of H psi = z psi at indices start_index .. start_index+len-1."""
    start_index: int
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    def contains(self, n: int) -> bool:
        return self.start_index <= n < self.start_index + len(self)

    def at(self, n: int) -> complex:
        return complex(self.values[n - self.start_index])


def transfer_matrix(
    a_prev: complex,
    a_cur: complex,
    b_cur: float,
    z: complex,
    threshold: float = SINGULAR_THRESHOLD,
    index: Optional[int] = None,
) -> TransferMatrix:
    """B_n = (1/a_n) [[b_n - z, -conj(a_{n-1})], [a_n, 0]]."""
    if abs(a_cur) <= threshold:
        raise SingularStepError(index, abs(a_cur))
    entries = np.array(
        [[b_cur - z, -np.conj(a_prev)], [a_cur, 0.0]], dtype=complex
    ) / a_cur
    return TransferMatrix(entries)


def _block_stderr(increments: np.ndarray) -> float:
    blocks = min(LE_BLOCKS, increments.shape[0])
    if blocks < 2:
        return 0.0
    means = np.array([chunk.mean() for chunk in np.array_split(increments, blocks)])
    return float(means.std(ddof=1) / np.sqrt(blocks))


def lyapunov_exponent(
    model: Union[JacobiFamily, CoefficientWindow],
    z: complex,
    steps: int,
    trace: bool = False,
    threshold: float = SINGULAR_THRESHOLD,
) -> CocycleResult:
    """
    Estimate L(z) = lim (1/n) log ||B_n ... B_1|| along the orbit.

    The product is renormalized by its max-abs entry each step. Singular steps
    are skipped and excluded from the average; more than MAX_SKIP_FRACTION of
    them raises DegenerateOrbitError. A CoefficientWindow may be passed in
    place of a family, in which case it must hold a_0 .. a_steps.
    """
    if steps < 1:
        raise DomainError(f"steps must be positive, got {steps}")
    if isinstance(model, CoefficientWindow):
        if len(model) < steps + 1:
            raise DomainError(f"window holds {len(model)} coefficients, need {steps + 1}")
        a, b = model.a[: steps + 1], model.b[: steps + 1]
    else:
        window = model.window(0, steps + 1, threshold)
        a, b = window.a, window.b

    increments, skipped_mask = cocycle_log_growth(
        np.ascontiguousarray(a, dtype=complex), np.ascontiguousarray(b, dtype=float), complex(z), threshold
    )
    skipped = int(skipped_mask.sum())
    if skipped > MAX_SKIP_FRACTION * steps:
        raise DegenerateOrbitError(skipped, steps)
    if skipped:
        logger.warning(f"Skipped {skipped} singular steps of {steps} at z={z}")

    counted = increments[~skipped_mask]
    raw = float(counted.sum() / counted.shape[0])
    if raw < LE_CLAMP_WARN:
        logger.warning(f"LE estimate {raw:.3e} at z={z} below statistical undershoot, clamped to 0")
    partial = np.cumsum(counted) / np.arange(1, counted.shape[0] + 1) if trace else None
    return CocycleResult(
        le_estimate=max(raw, 0.0),
        steps=int(counted.shape[0]),
        stderr_estimate=_block_stderr(counted),
        raw_estimate=raw,
        skipped=skipped,
        log_growth_trace=partial,
    )


def lyapunov_curve(
    model: JacobiFamily,
    energies: Sequence[complex],
    steps: int,
    max_concurrent: Optional[int] = None,
) -> List[Union[CocycleResult, HarperError]]:
    """
    lyapunov_exponent at every energy; entries are independent of evaluation order.

    A failing energy yields its exception in place of a result.
    """
    if len(energies) == 0:
        raise DomainError("energy grid must be nonempty")
    logger.debug(f"LE curve over {len(energies)} energies, {steps} steps each")
    results = gather_bounded(lambda z: lyapunov_exponent(model, z, steps), list(energies), max_concurrent)
    for z, result in zip(energies, results):
        if isinstance(result, BaseException) and not isinstance(result, HarperError):
            raise result
        if isinstance(result, HarperError):
            logger.warning(f"LE at z={z} failed: {result}")
    return results


def lyapunov_epsilon_ladder(
    model: JacobiFamily,
    energy: float,
    steps: int,
    ladder: Sequence[float] = EPSILON_LADDER,
) -> List[Tuple[float, CocycleResult]]:
    """L(E + i eps) along a ladder of eps, followed by eps = 0 (diagnostic)."""
    rungs = list(ladder) + [0.0]
    return [(eps, lyapunov_exponent(model, complex(energy, eps), steps)) for eps in rungs]


# ===========================
# Solutions and Wronskians
# ===========================

def wronskian(u: SolutionWindow, v: SolutionWindow, n: int) -> complex:
    """W_n[u, v] = u_n v_{n+1} - u_{n+1} v_n."""
    for w in (u, v):
        if not (w.contains(n) and w.contains(n + 1)):
            raise DomainError(f"window starting at {w.start_index} does not hold indices {n}, {n + 1}")
    return u.at(n) * v.at(n + 1) - u.at(n + 1) * v.at(n)


def propagate_solution(
    window: CoefficientWindow,
    z: complex,
    psi0: complex,
    psi1: complex,
    direction: str = FORWARD,
    threshold: float = SINGULAR_THRESHOLD,
) -> SolutionWindow:
    """
    Solve b_n psi_n + a_n psi_{n+1} + conj(a_{n-1}) psi_{n-1} = z psi_n over the window.

    Forward seeds psi at the first two indices and divides by a_n; backward
    seeds psi at the last index (psi0) and the one before it (psi1) and
    divides by conj(a_{n-1}).
    """
    length = len(window)
    if length < 2:
        raise DomainError("propagation needs a window of at least two sites")
    a, b, s = window.a, window.b, window.start_index
    psi = np.zeros(length, dtype=complex)
    if direction == FORWARD:
        psi[0], psi[1] = psi0, psi1
        for k in range(1, length - 1):
            if abs(a[k]) <= threshold:
                raise SingularStepError(s + k, abs(a[k]))
            psi[k + 1] = ((z - b[k]) * psi[k] - np.conj(a[k - 1]) * psi[k - 1]) / a[k]
    elif direction == BACKWARD:
        psi[-1], psi[-2] = psi0, psi1
        for k in range(length - 2, 0, -1):
            if abs(a[k - 1]) <= threshold:
                raise SingularStepError(s + k - 1, abs(a[k - 1]))
            psi[k - 1] = ((z - b[k]) * psi[k] - a[k] * psi[k + 1]) / np.conj(a[k - 1])
    else:
        raise DomainError(f"direction must be '{FORWARD}' or '{BACKWARD}', got {direction!r}")
    return SolutionWindow(s, psi)
