"""
Extended Harper model: couplings, sampling functions, coefficient windows,
coupling-space regions, the duality map and the Jensen log-integral.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Protocol, Tuple, Union, runtime_checkable

import mpmath
import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from config import (
    GOLDEN_MEAN,
    QUAD_DEGREES,
    QUAD_TOL,
    REGION_TOL,
    SINGULAR_THRESHOLD,
    ZERO_RADIUS_TOL,
)
from errors import AccuracyError, DomainError
from kernels import orbit_points

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


# ===========================
# Domain Types
# ===========================

@dataclass(frozen=True)
class Coupling:
    """Coupling triple (lambda1, lambda2, lambda3) in the normalized nonnegative cone."""
    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        values = (self.lambda1, self.lambda2, self.lambda3)
        if not all(math.isfinite(v) for v in values):
            raise DomainError(f"coupling entries must be finite, got {values}")
        if min(values) < 0.0:
            raise DomainError(f"coupling entries must be nonnegative, got {values}")
        if max(values) <= 0.0:
            raise DomainError("at least one coupling entry must be positive")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)

    def swapped(self) -> "Coupling":
        """Exchange lambda1 and lambda3."""
        return Coupling(self.lambda3, self.lambda2, self.lambda1)

    def norm_bound(self) -> float:
        """Bound on the operator norm: sup|c| from both neighbours plus sup|v|."""
        return 2.0 * (self.lambda1 + self.lambda2 + self.lambda3) + 2.0

    def __str__(self) -> str:
        return f"({self.lambda1:g},{self.lambda2:g},{self.lambda3:g})"


@dataclass(frozen=True)
class CoefficientWindow:
    """Coefficients a_n, b_n for n = start_index .. start_index + len - 1."""
    start_index: int
    a: np.ndarray
    b: np.ndarray
    near_singular: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise DomainError(f"a and b must be 1-d of equal length, got {self.a.shape} and {self.b.shape}")

    def __len__(self) -> int:
        return self.a.shape[0]

    @property
    def stop_index(self) -> int:
        """One past the last index held."""
        return self.start_index + len(self)

    def contains(self, n: int) -> bool:
        return self.start_index <= n < self.stop_index

    def a_at(self, n: int) -> complex:
        return complex(self.a[n - self.start_index])

    def b_at(self, n: int) -> float:
        return float(self.b[n - self.start_index])


@dataclass(frozen=True)
class Region:
    tag: str
    on_boundary: bool


@runtime_checkable
class JacobiFamily(Protocol):
    """A phase-indexed family of Jacobi coefficient sequences."""

    def window(self, start: int, length: int, threshold: float = SINGULAR_THRESHOLD) -> CoefficientWindow: ...

    def with_phase(self, theta: float) -> "JacobiFamily": ...

    def mean_log_offdiag(self) -> float: ...

    def norm_bound(self) -> float: ...


def _flag_singular(start: int, a: np.ndarray, threshold: float) -> Tuple[int, ...]:
    return tuple(int(start + k) for k in np.flatnonzero(np.abs(a) <= threshold))


@dataclass(frozen=True)
class HarperModel:
    """Extended Harper operator at coupling, frequency alpha and phase theta."""
    coupling: Coupling
    alpha: float = GOLDEN_MEAN
    theta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0,1), got {self.alpha}")
        if not 0.0 <= self.theta < 1.0:
            raise DomainError(f"theta must lie in [0,1), got {self.theta}")

    def orbit(self, start: int, length: int) -> np.ndarray:
        """theta + alpha*n mod 1 for n = start .. start+length-1."""
        # start*alpha is exact in rationals since alpha is a binary float
        x0 = float((Fraction(self.theta) + Fraction(self.alpha) * start) % 1)
        return orbit_points(x0, self.alpha, length)

    def window(self, start: int, length: int, threshold: float = SINGULAR_THRESHOLD) -> CoefficientWindow:
        x = self.orbit(start, length)
        a = sample_c(self.coupling, self.alpha, x)
        b = sample_v(x)
        return CoefficientWindow(start, a, b, _flag_singular(start, a, threshold))

    def with_phase(self, theta: float) -> "HarperModel":
        return HarperModel(self.coupling, self.alpha, theta % 1.0)

    def swapped(self) -> "HarperModel":
        return HarperModel(self.coupling.swapped(), self.alpha, self.theta)

    def mean_log_offdiag(self) -> float:
        return jensen_log_integral_closed(self.coupling)

    def norm_bound(self) -> float:
        return self.coupling.norm_bound()


@dataclass(frozen=True)
class ConstantModel:
    """Constant coefficients a_n = a, b_n = b; a=1, b=0 is the free Laplacian."""
    a: complex = 1.0
    b: float = 0.0

    def window(self, start: int, length: int, threshold: float = SINGULAR_THRESHOLD) -> CoefficientWindow:
        a = np.full(length, complex(self.a))
        b = np.full(length, float(self.b))
        return CoefficientWindow(start, a, b, _flag_singular(start, a, threshold))

    def with_phase(self, theta: float) -> "ConstantModel":
        return self

    def mean_log_offdiag(self) -> float:
        return math.log(abs(self.a))

    def norm_bound(self) -> float:
        return 2.0 * abs(self.a) + abs(self.b)


@dataclass(frozen=True)
class ReflectedModel:
    """Reflection n -> -n of a family: a_n -> conj(a_{-n-1}), b_n -> b_{-n}."""
    base: JacobiFamily = field(default_factory=ConstantModel)

    def window(self, start: int, length: int, threshold: float = SINGULAR_THRESHOLD) -> CoefficientWindow:
        # indices -start-length .. -start of the base cover both a_{-n-1} and b_{-n}
        inner = self.base.window(-start - length, length + 1, threshold)
        a = np.conj(inner.a[:-1][::-1])
        b = inner.b[1:][::-1].copy()
        return CoefficientWindow(start, a, b, _flag_singular(start, a, threshold))

    def with_phase(self, theta: float) -> "ReflectedModel":
        return ReflectedModel(self.base.with_phase(theta))

    def mean_log_offdiag(self) -> float:
        return self.base.mean_log_offdiag()

    def norm_bound(self) -> float:
        return self.base.norm_bound()


# ===========================
# Sampling functions
# ===========================

def sample_c(coupling: Coupling, alpha: float, x):
    """c(x) = l3 e^{-2 pi i (x + alpha/2)} + l2 + l1 e^{2 pi i (x + alpha/2)}; accepts arrays."""
    w = np.exp(1j * TWO_PI * (np.asarray(x, dtype=float) + 0.5 * alpha))
    value = coupling.lambda3 * np.conj(w) + coupling.lambda2 + coupling.lambda1 * w
    return complex(value) if np.ndim(value) == 0 else value


def sample_v(x):
    """v(x) = 2 cos(2 pi x); accepts arrays."""
    value = 2.0 * np.cos(TWO_PI * np.asarray(x, dtype=float))
    return float(value) if np.ndim(value) == 0 else value


def coefficients(
    model: JacobiFamily, start: int, length: int, threshold: float = SINGULAR_THRESHOLD
) -> CoefficientWindow:
    """Coefficient window a_n, b_n for n = start .. start+length-1."""
    if length < 1:
        raise DomainError(f"window length must be positive, got {length}")
    window = model.window(start, length, threshold)
    if window.near_singular:
        logger.debug(f"Window at {start} has {len(window.near_singular)} near-singular entries")
    return window


# ===========================
# Coupling-space geometry
# ===========================

def classify_region(coupling: Coupling, tol: float = REGION_TOL) -> Region:
    """
    Region I, II or III of the coupling; boundaries resolve to the lowest tag.

    I:   0 <= l1+l3 <= 1,  0 <= l2 <= 1
    II:  0 <= l1+l3 <= l2, 1 <= l2
    III: max(1, l2) <= l1+l3
    """
    s = coupling.lambda1 + coupling.lambda3
    l2 = coupling.lambda2

    def near(x: float, y: float) -> bool:
        return abs(x - y) <= tol

    if s <= 1.0 + tol and l2 <= 1.0 + tol:
        boundary = near(s, 1.0) or near(l2, 1.0) or near(s, 0.0) or near(l2, 0.0)
        return Region("I", boundary)
    if s <= l2 + tol and l2 >= 1.0 - tol:
        boundary = near(s, l2) or near(l2, 1.0) or near(s, 0.0)
        return Region("II", boundary)
    return Region("III", near(s, max(1.0, l2)))


def sigma_dual(coupling: Coupling) -> Coupling:
    """Duality map sigma(l) = (l3/l2, 1/l2, l1/l2)."""
    l2 = coupling.lambda2
    if l2 <= 0.0:
        raise DomainError("duality map is undefined at lambda2 = 0")
    return Coupling(coupling.lambda3 / l2, 1.0 / l2, coupling.lambda1 / l2)


def jensen_log_integral_closed(coupling: Coupling, tol: float = REGION_TOL) -> float:
    """
    Closed form of the integral over [0,1) of log|c(x)|.

    With w = e^{2 pi i x}, |c| = |l1 w^2 + l2 w + l3| and Jensen's formula gives
    log l3 or log l1 (the larger) when l1 + l3 >= l2, otherwise
    log((l2 + sqrt(l2^2 - 4 l1 l3)) / 2), which is log l2 when l1 or l3 is 0.
    """
    l1, l2, l3 = coupling.as_tuple()
    if l1 + l3 <= l2 + tol:
        if l1 == 0.0 or l3 == 0.0:
            return math.log(l2)
        s = l1 + l3
        disc = max((l2 - s) * (l2 + s) + (l1 - l3) ** 2, 0.0)
        return math.log(0.5 * (l2 + math.sqrt(disc)))
    if l3 >= l1:
        return math.log(l3)
    return math.log(l1)


def _c_zeros(coupling: Coupling, alpha: float) -> List[float]:
    """
    Points of [0,1) where |c| (nearly) vanishes.

    With w = e^{2 pi i (x + alpha/2)}, c(x) = conj(w) (l1 w^2 + l2 w + l3); roots
    of the quadratic within ZERO_RADIUS_TOL of the unit circle give the points.
    """
    roots = np.roots([coupling.lambda1, coupling.lambda2, coupling.lambda3])
    zeros = []
    for root in np.atleast_1d(roots):
        if abs(abs(root) - 1.0) <= ZERO_RADIUS_TOL:
            zeros.append(float((np.angle(root) / TWO_PI - 0.5 * alpha) % 1.0))
    zeros = sorted(set(zeros))
    if zeros:
        logger.debug(f"Near-zeros of |c| for {coupling}: {zeros}")
    return zeros


def _tanh_sinh_log_integral(coupling: Coupling, alpha: float, points: List[float], degree: int, tol: float) -> float:
    l1, l2, l3 = coupling.as_tuple()
    shift = 0.5 * alpha

    def integrand(x):
        w = mpmath.expjpi(2 * (x + shift))
        value = abs(l3 / w + l2 + l1 * w)
        return mpmath.log(value) if value > 0 else mpmath.mpf(-745)

    estimate, error = mpmath.quad(integrand, points, method="tanh-sinh", maxdegree=degree, error=True)
    estimate, error = float(estimate), float(error)
    if not error <= tol:
        raise AccuracyError(estimate, error, tol)
    return estimate


def jensen_log_integral_quadrature(
    coupling: Coupling, alpha: float = GOLDEN_MEAN, tol: float = QUAD_TOL
) -> float:
    """
    Adaptive quadrature of the integral of log|c(x)| over one period.

    Near-zeros of |c| become panel breakpoints and every panel is integrated
    with tanh-sinh nodes; the node budget escalates through QUAD_DEGREES and
    the last AccuracyError is re-raised if it is exhausted.
    """
    if tol <= 0.0:
        raise DomainError(f"quadrature tolerance must be positive, got {tol}")
    zeros = _c_zeros(coupling, alpha)
    points = [0.0] + [z for z in zeros if 0.0 < z < 1.0] + [1.0]

    for attempt in Retrying(
        stop=stop_after_attempt(len(QUAD_DEGREES)),
        retry=retry_if_exception_type(AccuracyError),
        reraise=True,
    ):
        with attempt:
            degree = QUAD_DEGREES[attempt.retry_state.attempt_number - 1]
            return _tanh_sinh_log_integral(coupling, alpha, points, degree, tol)


# ===========================
# Frequencies
# ===========================

def diophantine_witness(alpha: float, r: float, b: float, j_max: int) -> bool:
    """True iff |sin(2 pi j alpha)| > b / |j|^r for all 0 < |j| <= j_max."""
    if r <= 1.0 or b <= 0.0 or j_max < 1:
        raise DomainError(f"need r > 1, b > 0, j_max >= 1; got r={r}, b={b}, j_max={j_max}")
    j = np.arange(1, j_max + 1, dtype=float)
    # |sin| is even in j, so positive j suffice
    phase = np.mod(j * alpha, 1.0)
    return bool(np.all(np.abs(np.sin(TWO_PI * phase)) > b / j ** r))


def convergents(alpha: float, count: int) -> List[Fraction]:
    """First `count` continued-fraction convergents p/q of alpha (exact for the float)."""
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    x = Fraction(alpha)
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    out: List[Fraction] = []
    while len(out) < count:
        digit = math.floor(x)
        h_prev, h = h, digit * h + h_prev
        k_prev, k = k, digit * k + k_prev
        out.append(Fraction(h, k))
        frac = x - digit
        if frac == 0:
            break
        x = 1 / frac
    return out


def golden_or_float(text: Union[str, float]) -> float:
    """Resolve the `golden` keyword to (sqrt(5)-1)/2; otherwise parse a float."""
    if isinstance(text, str) and text.strip().lower() == "golden":
        return GOLDEN_MEAN
    return float(text)
