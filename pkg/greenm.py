"""
Half-line m-functions, decaying solutions and Green's function entries,
plus residual-valued checks of the identities tying them to the Lyapunov
exponent.

Conventions: m_{+,n} is the Green function at n+1 of the operator restricted
to [n+1, oo); m_{-,n} the one at n-1 of the operator on (-oo, n-1]. Both are
evaluated by Riccati sweeps seeded with 0 at distance `depth`.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from batch import gather_bounded, raise_first
from cocycle import SolutionWindow, lyapunov_exponent, wronskian
from config import (
    DEFAULT_DEPTH,
    DEPTH_REFERENCE_IM,
    EPSILON_LADDER,
    MAX_SCALED_DEPTH,
    STABLE_RTOL,
    UNDERFLOW_LIMIT,
    WRONSKIAN_FLOOR,
)
from errors import DomainError, NumericalError
from kernels import riccati_down, riccati_down_stacked, riccati_up
from model import CoefficientWindow, JacobiFamily

logger = logging.getLogger(__name__)

PHASE_CHUNK = 512


# ===========================
# Domain Types
# ===========================

@dataclass(frozen=True)
class HerglotzValue:
    """An m-function value; Im value > 0 whenever Im z > 0."""
    value: complex

    @property
    def imag(self) -> float:
        return self.value.imag

    def __complex__(self) -> complex:
        return self.value


@dataclass(frozen=True)
class BoundaryRatio:
    """Im m_+(E + i eps) / eps."""
    epsilon: float
    ratio: float


@dataclass(frozen=True)
class BoundaryLimit:
    ratios: Tuple[BoundaryRatio, ...]
    extrapolated: float
    diverging: bool


@dataclass(frozen=True)
class DecayingSolutions:
    """psi_- (decaying at -oo) and psi_+ (decaying at +oo), both equal to 1 at index 0."""
    psi_minus: SolutionWindow
    psi_plus: SolutionWindow
    window: CoefficientWindow


@dataclass(frozen=True)
class IdentityResult:
    lhs: float
    rhs: float
    residual: float


@dataclass(frozen=True)
class LimitingMReport:
    """Fraction of phases whose m_+(E + i eps) ladder settles to a finite nonzero value."""
    energy: float
    fraction_stable: float
    final_values: Tuple[complex, ...]


def _require_upper(z: complex):
    if not z.imag > 0.0:
        raise DomainError(f"need Im z > 0, got z={z}")


def _require_depth(depth: int):
    if depth < 1:
        raise DomainError(f"depth must be positive, got {depth}")


def scaled_depth(depth: int, im_z: float) -> int:
    """Riccati depth for a given Im z: `depth` down to DEPTH_REFERENCE_IM, growing like 1/Im z below it."""
    if im_z >= DEPTH_REFERENCE_IM:
        return depth
    return min(MAX_SCALED_DEPTH, max(depth, int(math.ceil(depth * DEPTH_REFERENCE_IM / im_z))))


# ===========================
# Riccati sweeps
# ===========================

def _sweep_down(window: CoefficientWindow, z: complex) -> np.ndarray:
    """m_{+, s-1} .. m_{+, s+L-2} for a window over sites s .. s+L-1, seeded at the far end."""
    out, ok = riccati_down(
        np.ascontiguousarray(np.abs(window.a) ** 2), np.ascontiguousarray(window.b, dtype=float), complex(z), UNDERFLOW_LIMIT
    )
    if not ok:
        raise NumericalError(f"Riccati denominator underflow in downward sweep at z={z}")
    return out


def _sweep_up(window: CoefficientWindow, z: complex) -> np.ndarray:
    """m_{-, s+2} .. m_{-, s+L} for a window over sites s .. s+L-1 (the first site only supplies a_s)."""
    out, ok = riccati_up(
        np.ascontiguousarray(np.abs(window.a[:-1]) ** 2),
        np.ascontiguousarray(window.b[1:], dtype=float),
        complex(z),
        UNDERFLOW_LIMIT,
    )
    if not ok:
        raise NumericalError(f"Riccati denominator underflow in upward sweep at z={z}")
    return out


def m_plus(model: JacobiFamily, z: complex, depth: int = DEFAULT_DEPTH, site: int = 0) -> HerglotzValue:
    """m_{+,site} from m_{+,n-1} = 1/((b_n - z) - |a_n|^2 m_{+,n}), seeded m_{+,site+depth} = 0."""
    _require_upper(z)
    _require_depth(depth)
    return HerglotzValue(complex(_sweep_down(model.window(site + 1, depth), z)[0]))


def m_minus(model: JacobiFamily, z: complex, depth: int = DEFAULT_DEPTH, site: int = 0) -> HerglotzValue:
    """m_{-,site} from m_{-,n+1} = 1/((b_n - z) - |a_{n-1}|^2 m_{-,n}), seeded m_{-,site-depth} = 0."""
    _require_upper(z)
    _require_depth(depth)
    return HerglotzValue(complex(_sweep_up(model.window(site - depth - 1, depth + 1), z)[-1]))


def m_from_resolvent(model: JacobiFamily, z: complex, N: int, site: int = 0) -> complex:
    """<delta_1, (H_+ - z)^{-1} delta_1> on the N sites site+1 .. site+N, by a banded solve."""
    if z.imag == 0.0:
        raise DomainError(f"need Im z != 0, got z={z}")
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    window = model.window(site + 1, N)
    ab = np.zeros((3, N), dtype=complex)
    ab[0, 1:] = window.a[:-1]
    ab[1] = window.b - z
    ab[2, :-1] = np.conj(window.a[:-1])
    rhs = np.zeros(N, dtype=complex)
    rhs[0] = 1.0
    try:
        x = solve_banded((1, 1), ab, rhs)
    except (LinAlgError, ValueError) as e:
        raise NumericalError(f"resolvent solve failed at z={z}: {e}") from e
    return complex(x[0])


# ===========================
# Decaying solutions and Green's function
# ===========================

def decaying_solutions(model: JacobiFamily, z: complex, lo: int, hi: int, depth: int = DEFAULT_DEPTH) -> DecayingSolutions:
    """
    psi_- and psi_+ on lo .. hi (widened to include 0), from the m-values.

    psi_{+,n+1} = -conj(a_n) m_{+,n} psi_{+,n} and psi_{-,n-1} = -a_{n-1} m_{-,n} psi_{-,n},
    run outwards from psi(0) = 1 and inverted on the other side.
    """
    _require_upper(z)
    _require_depth(depth)
    if hi < lo:
        raise DomainError(f"empty index range [{lo}, {hi}]")
    lo, hi = min(lo, 0), max(hi, 0)
    span = hi - lo
    window = model.window(lo, span + 1)
    a = window.a
    origin = -lo

    # mp[j] = m_{+, lo+j}, j = 0 .. span-1
    mp = _sweep_down(model.window(lo + 1, span + depth), z)[:span]
    # mm[j] = m_{-, lo+1+j}, j = 0 .. span-1
    mm = _sweep_up(model.window(lo - depth - 1, span + depth + 1), z)[depth:]

    plus = np.zeros(span + 1, dtype=complex)
    minus = np.zeros(span + 1, dtype=complex)
    plus[origin] = 1.0
    minus[origin] = 1.0
    for j in range(origin, span):
        plus[j + 1] = -np.conj(a[j]) * mp[j] * plus[j]
        minus[j + 1] = minus[j] / (-a[j] * mm[j])
    for j in range(origin, 0, -1):
        plus[j - 1] = plus[j] / (-np.conj(a[j - 1]) * mp[j - 1])
        minus[j - 1] = -a[j - 1] * mm[j - 1] * minus[j]

    if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
        raise NumericalError(f"decaying solutions over [{lo}, {hi}] overflowed at z={z}")
    return DecayingSolutions(SolutionWindow(lo, minus), SolutionWindow(lo, plus), window)


def green_entry(model: JacobiFamily, z: complex, n: int, m: int, depth: int = DEFAULT_DEPTH) -> complex:
    """G(n, m; z) = psi_-(min) psi_+(max) / (a_m W_m[psi_-, psi_+])."""
    sol = decaying_solutions(model, z, min(n, m), max(n, m) + 1, depth)
    denom = sol.window.a_at(m) * wronskian(sol.psi_minus, sol.psi_plus, m)
    if abs(denom) < WRONSKIAN_FLOOR:
        raise NumericalError(f"vanishing Wronskian at column {m}, z={z}")
    return sol.psi_minus.at(min(n, m)) * sol.psi_plus.at(max(n, m)) / denom


def green_diag_residuals(model: JacobiFamily, z: complex, depth: int = DEFAULT_DEPTH) -> Tuple[float, float]:
    """Residuals of the two identities expressing 1/G(0,0) and 1/G(1,1) through m_+ and m_-."""
    g00 = green_entry(model, z, 0, 0, depth)
    g11 = green_entry(model, z, 1, 1, depth)
    mp = m_plus(model, z, depth, 0).value
    mm = m_minus(model, z, depth, 0).value
    window = model.window(-1, 2)
    a_left2 = abs(window.a_at(-1)) ** 2
    a0_2 = abs(window.a_at(0)) ** 2
    b0 = window.b_at(0)

    left = a_left2 * mm + z - b0
    first = abs(-1.0 / g00 - (a0_2 * mp + left))
    second = abs(1.0 / g11 - (1.0 / mp + a0_2 / left))
    return first, second


# ===========================
# Identity checks
# ===========================

def _phase_m_plus(model: JacobiFamily, thetas: Sequence[float], z: complex, depth: int) -> Tuple[np.ndarray, np.ndarray]:
    """|a_0|^2 and m_{+,0} at each phase, one vectorized sweep per chunk."""
    a0_sq = np.empty(len(thetas))
    values = np.empty(len(thetas), dtype=complex)
    for start in range(0, len(thetas), PHASE_CHUNK):
        chunk = thetas[start:start + PHASE_CHUNK]
        windows = [model.with_phase(theta).window(0, depth + 1) for theta in chunk]
        a = np.stack([w.a for w in windows])
        b = np.stack([w.b for w in windows])
        m, ok = riccati_down_stacked(np.abs(a[:, 1:]) ** 2, b[:, 1:], complex(z), UNDERFLOW_LIMIT)
        if not ok:
            raise NumericalError(f"Riccati denominator underflow across phases at z={z}")
        a0_sq[start:start + len(chunk)] = np.abs(a[:, 0]) ** 2
        values[start:start + len(chunk)] = m
    return a0_sq, values


def prop24_check(
    model: JacobiFamily,
    z: complex,
    phases: int = 10_000,
    depth: int = 500,
    cocycle_steps: int = 100_000,
) -> IdentityResult:
    """
    2 L(z) against the phase average of log(1 + Im z / (|a_0|^2 Im m_+)).

    The left side comes from the cocycle; the right side averages over the
    uniform grid theta_j = j / phases.
    """
    _require_upper(z)
    if phases < 1:
        raise DomainError(f"phases must be positive, got {phases}")
    lhs = 2.0 * lyapunov_exponent(model, z, cocycle_steps).le_estimate

    thetas = [j / phases for j in range(phases)]
    a0_sq, values = _phase_m_plus(model, thetas, z, depth)
    with np.errstate(divide="ignore"):
        terms = np.log1p(z.imag / (a0_sq * values.imag))
    rhs = math.fsum(terms.tolist()) / phases
    residual = abs(lhs - rhs)
    logger.debug(f"LE/m identity at z={z}: lhs={lhs:.6f} rhs={rhs:.6f} over {phases} phases")
    return IdentityResult(lhs, rhs, residual)


def lemma26_residual(model: JacobiFamily, z: complex, N: int = DEFAULT_DEPTH) -> float:
    """
    |Im m_+ / Im z - ||P_+ psi_+||^2 / (|a_0|^2 |psi_{+,0}|^2)|.

    The norm sums psi_+ over 1 .. N and adds a geometric tail from the decay
    rate over the last stretch of the window.
    """
    _require_upper(z)
    if N < 2:
        raise DomainError(f"N must be at least 2, got {N}")
    lhs = m_plus(model, z, 2 * N, 0).imag / z.imag

    # psi_+ alone on 0 .. N with psi_{+,0} = 1; its decay only ever underflows to 0
    a = model.window(0, N).a
    mp = _sweep_down(model.window(1, 2 * N), z)[:N]
    psi = np.concatenate(([1.0 + 0j], np.cumprod(-np.conj(a) * mp)))
    mod2 = np.abs(psi) ** 2
    norm = math.fsum(mod2[1:].tolist())

    stretch = max(1, min(50, N // 10))
    tail = 0.0
    if mod2[N - stretch] > 0.0:
        rate = (mod2[N] / mod2[N - stretch]) ** (1.0 / stretch)
        if rate < 1.0:
            tail = mod2[N] * rate / (1.0 - rate)
        else:
            logger.debug(f"psi_+ not decaying over the last {stretch} sites at z={z}; tail omitted")
    rhs = (norm + tail) / abs(a[0]) ** 2
    return abs(lhs - rhs)


# ===========================
# Real-axis diagnostics
# ===========================

def _validate_ladder(ladder: Sequence[float]) -> List[float]:
    rungs = [float(eps) for eps in ladder]
    if not rungs:
        raise DomainError("epsilon ladder must be nonempty")
    if any(eps <= 0.0 for eps in rungs):
        raise DomainError(f"epsilon ladder must be positive, got {rungs}")
    if any(b >= a for a, b in zip(rungs, rungs[1:])):
        raise DomainError(f"epsilon ladder must be strictly decreasing, got {rungs}")
    return rungs


def boundary_ratio(model: JacobiFamily, E: float, epsilon: float, depth: int = DEFAULT_DEPTH) -> BoundaryRatio:
    """Im m_+(E + i eps) / eps, with the Riccati depth scaled to eps."""
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    value = m_plus(model, complex(E, epsilon), scaled_depth(depth, epsilon), 0)
    return BoundaryRatio(epsilon, max(value.imag, 0.0) / epsilon)


def boundary_limit(
    model: JacobiFamily, E: float, ladder: Sequence[float] = EPSILON_LADDER, depth: int = DEFAULT_DEPTH
) -> BoundaryLimit:
    """
    boundary_ratio along a decreasing ladder with a linear-in-eps extrapolation.

    The ladder is flagged diverging when the last ratio grows at least half as
    fast as 1/eps, i.e. Im m_+ stays bounded away from 0.
    """
    rungs = _validate_ladder(ladder)
    ratios = tuple(boundary_ratio(model, E, eps, depth) for eps in rungs)
    if len(ratios) < 2:
        return BoundaryLimit(ratios, ratios[0].ratio, False)

    prev, last = ratios[-2], ratios[-1]
    growth = last.ratio / prev.ratio if prev.ratio > 0.0 else math.inf
    diverging = growth >= 0.5 * prev.epsilon / last.epsilon
    if diverging:
        extrapolated = math.inf
    else:
        extrapolated = (prev.epsilon * last.ratio - last.epsilon * prev.ratio) / (prev.epsilon - last.epsilon)
    logger.debug(f"Boundary ratios at E={E}: {[r.ratio for r in ratios]} (diverging={diverging})")
    return BoundaryLimit(ratios, extrapolated, diverging)


def singular_support_diagnostic(
    model: JacobiFamily, E: float, eps_ladder: Sequence[float] = EPSILON_LADDER, depth: int = DEFAULT_DEPTH
) -> List[float]:
    """Im G(0,0; E + i eps) + Im G(1,1; E + i eps) along the ladder; growth hints at singular support."""
    values = []
    for eps in _validate_ladder(eps_ladder):
        z = complex(E, eps)
        d = scaled_depth(depth, eps)
        values.append(green_entry(model, z, 0, 0, d).imag + green_entry(model, z, 1, 1, d).imag)
    return values


def limiting_m_diagnostic(
    model: JacobiFamily,
    E: float,
    phases: int = 100,
    ladder: Sequence[float] = EPSILON_LADDER,
    depth: int = DEFAULT_DEPTH,
    rtol: float = STABLE_RTOL,
    max_concurrent: Optional[int] = None,
) -> LimitingMReport:
    """
    For each phase j/phases, whether m_+(E + i eps) settles along the ladder.

    Settled means the last two rungs agree to rtol relative and the last value
    is finite and nonzero. Report metric only.
    """
    rungs = _validate_ladder(ladder)
    if phases < 1:
        raise DomainError(f"phases must be positive, got {phases}")

    def ladder_at(theta: float) -> List[complex]:
        shifted = model.with_phase(theta)
        return [m_plus(shifted, complex(E, eps), scaled_depth(depth, eps), 0).value for eps in rungs]

    runs = raise_first(gather_bounded(ladder_at, [j / phases for j in range(phases)], max_concurrent))
    stable = 0
    for values in runs:
        last = values[-1]
        if not (np.isfinite(last) and last != 0.0):
            continue
        if len(values) < 2 or abs(last - values[-2]) <= rtol * abs(last):
            stable += 1
    fraction = stable / phases
    logger.info(f"Limiting m_+ at E={E}: {stable}/{phases} phases settled")
    return LimitingMReport(E, fraction, tuple(values[-1] for values in runs))
