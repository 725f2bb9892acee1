"""
Cross-checks composed from the model, cocycle, spectrum and greenm modules,
and the concurrent battery runner behind `verify`.

Every check returns a CheckReport whose `passed` flag is a pure function of
the residual and the tolerance.
"""

import asyncio
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from cocycle import lyapunov_curve, lyapunov_exponent
from config import (
    BOUNDARY_START,
    BOUNDARY_STEPS,
    BOUNDARY_TARGET,
    CONSISTENCY_SAMPLES,
    DEFAULT_DEPTH,
    DEFAULT_TOLERANCES,
    EIGEN_TOL,
    EIGENSOLVER_SAMPLES,
    EPSILON_LADDER,
    INTERLACE_N,
    JENSEN_SAMPLES,
    LEMMA26_MODELS,
    LIMITING_M_PHASES,
    ORACLE_MODELS,
    PROP24_DEPTH,
    PROP24_Z,
    RANDOM_IM_Z,
    REGION_TOL,
    THOULESS_EXCLUSION,
    THOULESS_FAR_E,
    THOULESS_SAMPLES,
    WITNESS_B,
    WITNESS_J,
    WITNESS_R,
    WORKER_COUNT,
)
from batch import run_in_process_async
from errors import DomainError, HarperError, UnsupportedRegionError, WorkerError
from greenm import (
    green_diag_residuals,
    lemma26_residual,
    limiting_m_diagnostic,
    m_from_resolvent,
    m_plus,
    prop24_check,
)
from model import (
    Coupling,
    HarperModel,
    JacobiFamily,
    classify_region,
    convergents,
    diophantine_witness,
    jensen_log_integral_closed,
    jensen_log_integral_quadrature,
    sigma_dual,
)
from settings_manager import VerificationConfig
from spectrum import (
    TridiagonalOperator,
    eigenvalues_sturm,
    kolmogorov_distance,
    pooled_eigenvalues,
    spectrum_samples,
)

logger = logging.getLogger(__name__)


# ===========================
# Reports
# ===========================

@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check; passed iff max_abs_residual <= tolerance, so a nan residual never passes."""
    name: str
    inputs: Dict[str, Any]
    measured: Tuple[float, ...]
    expected: Tuple[float, ...]
    max_abs_residual: float
    tolerance: float
    passed: bool
    runtime_seconds: float = 0.0
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @classmethod
    def build(
        cls,
        name: str,
        inputs: Dict[str, Any],
        measured: Sequence[float],
        expected: Sequence[float],
        tolerance: float,
        notes: Sequence[str] = (),
        residual: Optional[float] = None,
    ) -> "CheckReport":
        measured = tuple(float(x) for x in measured)
        expected = tuple(float(x) for x in expected)
        if residual is None:
            residual = max((abs(m - e) for m, e in zip(measured, expected)), default=0.0)
            if any(math.isnan(m - e) for m, e in zip(measured, expected)):
                residual = math.nan
        return cls(
            name=name,
            inputs=dict(inputs),
            measured=measured,
            expected=expected,
            max_abs_residual=float(residual),
            tolerance=float(tolerance),
            passed=bool(residual <= tolerance),
            notes=tuple(notes),
        )

    def with_runtime(self, seconds: float) -> "CheckReport":
        return CheckReport(
            self.name, self.inputs, self.measured, self.expected, self.max_abs_residual,
            self.tolerance, self.passed, seconds, self.notes,
        )


def failed_report(name: str, tolerance: float, reason: str, inputs: Optional[Dict[str, Any]] = None) -> CheckReport:
    """Report for a check that raised or ran out of time: no residual (nan), so it fails at any tolerance."""
    return CheckReport(name, dict(inputs or {}), (), (), math.nan, float(tolerance), False, 0.0, (reason,))


def _model_inputs(model: JacobiFamily) -> Dict[str, Any]:
    if isinstance(model, HarperModel):
        return {
            "coupling": list(model.coupling.as_tuple()),
            "alpha": model.alpha,
            "theta": model.theta,
            "region": classify_region(model.coupling).tag,
            "diophantine_witness": diophantine_witness(model.alpha, WITNESS_R, WITNESS_B, WITNESS_J),
        }
    return {"model": repr(model)}


def _le_values(results: Sequence[Any]) -> List[float]:
    """LE estimates from a lyapunov_curve; failed energies become nan."""
    return [r.le_estimate if not isinstance(r, BaseException) else math.nan for r in results]


# ===========================
# Closed-form Lyapunov exponent
# ===========================

def closed_form_branches(coupling: Coupling) -> Tuple[float, float]:
    """
    The two region-I formulas evaluated at coupling.

    First: log((1 + sqrt(1 - 4 l1 l3)) / (l2 + sqrt(l2^2 - 4 l1 l3))), used when l2 >= l1 + l3.
    Second: log((1 + sqrt(1 - 4 l1 l3)) / (2 max(l1, l3))), used when l2 <= l1 + l3.
    A branch outside its domain evaluates to nan.
    """
    l1, l2, l3 = coupling.as_tuple()
    top = 1.0 + math.sqrt(max(1.0 - 4.0 * l1 * l3, 0.0))
    # l2^2 - 4 l1 l3, exactly (l1 - l3)^2 on the switch line l2 = l1 + l3
    disc = (l2 - (l1 + l3)) * (l2 + (l1 + l3)) + (l1 - l3) ** 2
    below = l2 + math.sqrt(disc) if disc >= 0.0 and l2 > 0.0 else math.nan
    first = math.log(top / below) if below > 0.0 else math.nan
    big = max(l1, l3)
    second = math.log(top / (2.0 * big)) if big > 0.0 else math.nan
    return first, second


def closed_form_le(coupling: Coupling, E: Optional[float] = None, tol: float = REGION_TOL) -> float:
    """
    Lyapunov exponent on the spectrum: 0 in region II, the region-I formula in
    region I. The value does not depend on E.
    """
    region = classify_region(coupling, tol)
    if region.tag == "III":
        raise UnsupportedRegionError(f"no closed form for {coupling}: region III is the self-dual region")
    if region.tag == "II":
        return 0.0
    first, second = closed_form_branches(coupling)
    if coupling.lambda2 >= coupling.lambda1 + coupling.lambda3 - tol and not math.isnan(first):
        return first
    return second


def closed_form_identity_residual(coupling: Coupling) -> float:
    """|closed_form_le - (J(sigma(l)) + log l2 - J(l))| with J the closed Jensen integral."""
    rhs = jensen_log_integral_closed(sigma_dual(coupling)) + math.log(coupling.lambda2) - jensen_log_integral_closed(coupling)
    return abs(closed_form_le(coupling) - rhs)


# ===========================
# Checks
# ===========================

def theorem31_check(
    model: HarperModel,
    n_energies: int,
    steps: int,
    N: int,
    M: int,
    method: str = "lapack",
    tolerance: float = DEFAULT_TOLERANCES["theorem31"],
    max_concurrent: Optional[int] = None,
    limiting_phases: int = LIMITING_M_PHASES,
    depth: int = DEFAULT_DEPTH,
) -> CheckReport:
    """
    Cocycle LE at spectrum samples against closed_form_le.

    With limiting_phases > 0 the report also carries the fraction of phases
    whose m_+(E + i eps) settles at the first sample energy (metric only).
    """
    expected = closed_form_le(model.coupling)
    energies = spectrum_samples(model, N, M, n_energies, method)
    measured = _le_values(lyapunov_curve(model, list(energies), steps, max_concurrent))
    inputs = {**_model_inputs(model), "energies": [float(e) for e in energies], "steps": steps, "N": N, "M": M}
    notes = []
    if expected == 0.0:
        notes.append("region II: exact value 0, finite-size LE bias is O(log N / N + 1/sqrt(steps))")
    if limiting_phases > 0 and len(energies):
        E = float(energies[0])
        try:
            limit = limiting_m_diagnostic(model, E, limiting_phases, EPSILON_LADDER, depth, max_concurrent=max_concurrent)
            inputs["limiting_m_energy"] = E
            inputs["limiting_m_fraction_stable"] = limit.fraction_stable
        except HarperError as e:
            logger.warning(f"Limiting m_+ metric at E={E} unavailable: {e}")
            notes.append(f"limiting m_+ metric unavailable: {e}")
    return CheckReport.build("theorem31", inputs, measured, [expected] * len(measured), tolerance, notes)


def thouless_check(
    model: JacobiFamily,
    E: Union[complex, Sequence[complex]],
    N: int,
    M: int,
    steps: int,
    method: str = "lapack",
    tolerance: float = DEFAULT_TOLERANCES["thouless"],
    pool: Optional[np.ndarray] = None,
) -> CheckReport:
    """
    Cocycle LE against -mean log|a| + mean log|E - E_j| over the pooled
    truncation eigenvalues. Eigenvalues within THOULESS_EXCLUSION of E are
    left out and counted.
    """
    energies = [complex(e) for e in np.atleast_1d(E)]
    if pool is None:
        pool = pooled_eigenvalues(model, N, M, method)
    offset = model.mean_log_offdiag()
    measured, expected, excluded = [], [], []
    for z in energies:
        dist = np.abs(z - pool)
        kept = dist[dist >= THOULESS_EXCLUSION]
        excluded.append(int(pool.shape[0] - kept.shape[0]))
        potential = math.fsum(np.log(kept).tolist()) / kept.shape[0]
        expected.append(potential - offset)
        measured.append(lyapunov_exponent(model, z, steps).le_estimate)
    inputs = {
        **_model_inputs(model),
        "energies": [[z.real, z.imag] for z in energies],
        "excluded": excluded,
        "steps": steps,
        "N": N,
        "M": M,
    }
    notes = [f"{sum(excluded)} eigenvalues within {THOULESS_EXCLUSION:g} of E excluded"] if any(excluded) else []
    return CheckReport.build("thouless", inputs, measured, expected, tolerance, notes)


def duality_dos_check(
    model: HarperModel,
    N: int,
    M: int,
    method: str = "lapack",
    tolerance: float = DEFAULT_TOLERANCES["duality_dos"],
    max_concurrent: Optional[int] = None,
) -> CheckReport:
    """Kolmogorov distance between the DOS of l and the l2-rescaled DOS of sigma(l)."""
    dual = HarperModel(sigma_dual(model.coupling), model.alpha, model.theta)
    pool = pooled_eigenvalues(model, N, M, method, max_concurrent=max_concurrent)
    dual_pool = model.coupling.lambda2 * pooled_eigenvalues(dual, N, M, method, max_concurrent=max_concurrent)
    distance = kolmogorov_distance(pool, dual_pool)
    inputs = {**_model_inputs(model), "dual": list(dual.coupling.as_tuple()), "N": N, "M": M}
    return CheckReport.build(
        "duality_dos", inputs, [distance], [0.0], tolerance,
        notes=(f"sampling floor 1/(N*M) = {1.0 / (N * M):.2e}",),
    )


def lambda_swap_check(
    model: HarperModel,
    n_energies: int,
    steps: int,
    N: int,
    M: int,
    method: str = "lapack",
    tolerance: float = DEFAULT_TOLERANCES["lambda_swap"],
    max_concurrent: Optional[int] = None,
) -> CheckReport:
    """LE of (l1,l2,l3) against (l3,l2,l1) on the same spectrum samples."""
    inputs = {**_model_inputs(model), "steps": steps, "N": N, "M": M}
    if model.coupling.lambda1 == model.coupling.lambda3:
        return CheckReport.build("lambda_swap", inputs, (), (), tolerance, notes=("self-symmetric coupling",))
    energies = list(spectrum_samples(model, N, M, n_energies, method))
    original = _le_values(lyapunov_curve(model, energies, steps, max_concurrent))
    swapped = _le_values(lyapunov_curve(model.swapped(), energies, steps, max_concurrent))
    inputs["energies"] = [float(e) for e in energies]
    return CheckReport.build("lambda_swap", inputs, swapped, original, tolerance)


def boundary_approach_check(
    start: Coupling,
    target: Coupling,
    alpha: float,
    count: int,
    n_energies: int,
    steps: int,
    N: int,
    M: int,
    method: str = "lapack",
    tolerance: float = DEFAULT_TOLERANCES["region_ii_boundary"],
) -> CheckReport:
    """
    Walk from an interior region-II coupling towards a boundary coupling,
    l_k = target + 2^-k (start - target), and record the largest LE on spectrum
    samples at each step. All of them should vanish.
    """
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    s, t = np.array(start.as_tuple()), np.array(target.as_tuple())
    path = [Coupling(*(t + 2.0 ** -k * (s - t))) for k in range(count)]
    for coupling in path:
        region = classify_region(coupling)
        if region.tag != "II":
            raise DomainError(f"approach point {coupling} lies in region {region.tag}, expected II")
    measured = []
    for coupling in path:
        model = HarperModel(coupling, alpha)
        energies = list(spectrum_samples(model, N, M, n_energies, method))
        measured.append(float(np.max(_le_values(lyapunov_curve(model, energies, steps)))))
        logger.debug(f"Boundary approach at {coupling}: max LE {measured[-1]:.4f}")
    inputs = {
        "path": [list(c.as_tuple()) for c in path],
        "target": list(target.as_tuple()),
        "target_region": classify_region(target).tag,
        "alpha": alpha,
        "diophantine_witness": diophantine_witness(alpha, WITNESS_R, WITNESS_B, WITNESS_J),
        "steps": steps,
        "N": N,
        "M": M,
    }
    return CheckReport.build("region_ii_boundary", inputs, measured, [0.0] * count, tolerance)


def rational_approximant_check(
    model: HarperModel,
    order: int,
    n_energies: int,
    steps: int,
    N: int,
    M: int,
    method: str = "lapack",
    tolerance: float = DEFAULT_TOLERANCES["rational_approximant"],
) -> CheckReport:
    """theorem31_check repeated at the order-th continued-fraction convergent of alpha (informational)."""
    if order < 1:
        return CheckReport.build("rational_approximant", _model_inputs(model), (), (), tolerance, notes=("skipped",))
    approximant = convergents(model.alpha, order + 1)[-1]
    if not 0 < approximant < 1:
        raise DomainError(f"convergent {approximant} of order {order} is not in (0,1)")
    periodic = HarperModel(model.coupling, float(approximant), model.theta)
    report = theorem31_check(periodic, n_energies, steps, N, M, method, tolerance, limiting_phases=0)
    inputs = {**report.inputs, "convergent": f"{approximant.numerator}/{approximant.denominator}"}
    return CheckReport.build(
        "rational_approximant", inputs, report.measured, report.expected, tolerance,
        notes=("periodic approximant, informational",),
    )


# ===========================
# Randomized identity checks
# ===========================

def random_models(count: int, alpha: float, rng: np.random.Generator) -> List[Tuple[HarperModel, complex]]:
    """Random (model, z) pairs with Im z = RANDOM_IM_Z."""
    pairs = []
    for _ in range(count):
        l1, l3 = rng.uniform(0.0, 1.0, size=2)
        l2 = rng.uniform(0.05, 1.5)
        model = HarperModel(Coupling(float(l1), float(l2), float(l3)), alpha, float(rng.uniform(0.0, 1.0)))
        z = complex(rng.uniform(-3.0, 3.0), RANDOM_IM_Z)
        pairs.append((model, z))
    return pairs


def _pairs_inputs(pairs: Sequence[Tuple[HarperModel, complex]], seed: int, **extra) -> Dict[str, Any]:
    return {
        "seed": seed,
        "alpha": pairs[0][0].alpha if pairs else None,
        "models": len(pairs),
        "im_z": RANDOM_IM_Z,
        **extra,
    }


def m_oracle_check(config: VerificationConfig, tolerance: float) -> CheckReport:
    pairs = random_models(ORACLE_MODELS, config.alpha, np.random.default_rng(config.seed))
    residuals = [abs(m_plus(model, z, config.depth).value - m_from_resolvent(model, z, config.depth)) for model, z in pairs]
    return CheckReport.build(
        "m_oracle", _pairs_inputs(pairs, config.seed, depth=config.depth), residuals, [0.0] * len(residuals), tolerance
    )


def green_identities_check(config: VerificationConfig, tolerance: float) -> CheckReport:
    pairs = random_models(ORACLE_MODELS, config.alpha, np.random.default_rng(config.seed + 1))
    residuals = [r for model, z in pairs for r in green_diag_residuals(model, z, config.depth)]
    return CheckReport.build(
        "green_identities", _pairs_inputs(pairs, config.seed + 1, depth=config.depth),
        residuals, [0.0] * len(residuals), tolerance,
    )


def lemma26_check(config: VerificationConfig, tolerance: float) -> CheckReport:
    pairs = random_models(LEMMA26_MODELS, config.alpha, np.random.default_rng(config.seed + 2))
    residuals = [lemma26_residual(model, z, config.depth) for model, z in pairs]
    return CheckReport.build(
        "lemma26", _pairs_inputs(pairs, config.seed + 2, N=config.depth), residuals, [0.0] * len(residuals), tolerance
    )


def random_couplings(count: int, rng: np.random.Generator) -> List[Coupling]:
    """Couplings with every entry in [0.05, 1)."""
    return [Coupling(*map(float, rng.uniform(0.05, 1.0, size=3))) for _ in range(count)]


def random_region_i_interior(count: int, rng: np.random.Generator) -> List[Coupling]:
    """Couplings with 0 < l1 + l3 < 1 and 0 < l2 < 1, away from the boundaries."""
    out = []
    for _ in range(count):
        s = rng.uniform(0.01, 0.99)
        split = rng.uniform(0.0, 1.0)
        out.append(Coupling(float(s * split), float(rng.uniform(0.01, 0.99)), float(s * (1.0 - split))))
    return out


def jensen_check(config: VerificationConfig, tolerance: float) -> CheckReport:
    couplings = random_couplings(JENSEN_SAMPLES, np.random.default_rng(config.seed + 3))
    measured = [jensen_log_integral_quadrature(c, config.alpha) for c in couplings]
    expected = [jensen_log_integral_closed(c) for c in couplings]
    return CheckReport.build(
        "jensen", {"seed": config.seed + 3, "couplings": len(couplings), "alpha": config.alpha}, measured, expected, tolerance
    )


def closed_form_consistency_check(config: VerificationConfig, tolerance: float) -> CheckReport:
    couplings = random_region_i_interior(CONSISTENCY_SAMPLES, np.random.default_rng(config.seed + 4))
    residuals = [closed_form_identity_residual(c) for c in couplings]
    return CheckReport.build(
        "closed_form_consistency", {"seed": config.seed + 4, "couplings": len(couplings)},
        residuals, [0.0] * len(residuals), tolerance,
    )


def characteristic_roots(op: TridiagonalOperator, polish: int = 3) -> np.ndarray:
    """
    Eigenvalues as roots of the characteristic polynomial built by the
    three-term determinant recursion, polished by Newton steps on the same
    recursion.
    """
    diag = op.diag.astype(float)
    off2 = np.abs(op.offdiag) ** 2
    prev, cur = np.polynomial.Polynomial([1.0]), np.polynomial.Polynomial([diag[0], -1.0])
    for k in range(1, len(op)):
        prev, cur = cur, np.polynomial.Polynomial([diag[k], -1.0]) * cur - off2[k - 1] * prev
    roots = np.sort(np.real(cur.roots()))

    for _ in range(polish):
        p_prev, p = np.ones_like(roots), diag[0] - roots
        d_prev, d = np.zeros_like(roots), -np.ones_like(roots)
        for k in range(1, len(op)):
            p_next = (diag[k] - roots) * p - off2[k - 1] * p_prev
            d_next = (diag[k] - roots) * d - p - off2[k - 1] * d_prev
            p_prev, p, d_prev, d = p, p_next, d, d_next
        step = np.divide(p, d, out=np.zeros_like(p), where=d != 0.0)
        roots = roots - step
    return np.sort(roots)


def random_tridiagonal(n: int, rng: np.random.Generator) -> TridiagonalOperator:
    return TridiagonalOperator(rng.uniform(-2.0, 2.0, size=n), rng.uniform(0.1, 1.0, size=n - 1))


def interlacing_violation(op: TridiagonalOperator, method: str = "lapack") -> float:
    """Largest amount by which the (N-1)-section eigenvalues leave their interlacing brackets."""
    full = eigenvalues_sturm(op, EIGEN_TOL, method)
    section = TridiagonalOperator(op.diag[:-1], op.offdiag[:-1], op.start_index)
    inner = eigenvalues_sturm(section, EIGEN_TOL, method)
    below = np.maximum(full[:-1] - inner, 0.0)
    above = np.maximum(inner - full[1:], 0.0)
    return float(max(below.max(initial=0.0), above.max(initial=0.0)))


def eigensolver_check(config: VerificationConfig, tolerance: float) -> CheckReport:
    rng = np.random.default_rng(config.seed + 5)
    residuals = []
    for _ in range(EIGENSOLVER_SAMPLES):
        op = random_tridiagonal(int(rng.integers(2, 9)), rng)
        oracle = characteristic_roots(op)
        for method in ("bisect", "lapack"):
            residuals.append(float(np.max(np.abs(eigenvalues_sturm(op, EIGEN_TOL, method) - oracle))))
    interlace = interlacing_violation(random_tridiagonal(INTERLACE_N, rng), config.eigensolver)
    residuals.append(interlace)
    return CheckReport.build(
        "eigensolver",
        {"seed": config.seed + 5, "operators": EIGENSOLVER_SAMPLES, "interlace_n": INTERLACE_N},
        residuals, [0.0] * len(residuals), tolerance,
        notes=(f"interlacing violation {interlace:.3e}",),
    )


# ===========================
# Registry
# ===========================

def _theorem31(config: VerificationConfig, tolerance: float) -> CheckReport:
    return theorem31_check(
        config.model(), config.energy_count, config.steps, config.N, config.M, config.eigensolver, tolerance,
        depth=config.depth,
    )


def _thouless(config: VerificationConfig, tolerance: float) -> CheckReport:
    model = config.model()
    pool = pooled_eigenvalues(model, config.N, config.M, config.eigensolver)
    count = min(THOULESS_SAMPLES, pool.shape[0])
    ranks = np.floor((np.arange(count) + 0.5) * pool.shape[0] / count).astype(int)
    energies = [complex(e) for e in pool[ranks]] + [complex(THOULESS_FAR_E)]
    return thouless_check(model, energies, config.N, config.M, config.steps, config.eigensolver, tolerance, pool=pool)


def _duality_dos(config: VerificationConfig, tolerance: float) -> CheckReport:
    return duality_dos_check(config.model(), config.N, config.M, config.eigensolver, tolerance)


def _lambda_swap(config: VerificationConfig, tolerance: float) -> CheckReport:
    return lambda_swap_check(config.model(), config.energy_count, config.steps, config.N, config.M, config.eigensolver, tolerance)


def _prop24(config: VerificationConfig, tolerance: float) -> CheckReport:
    model = config.model()
    result = prop24_check(model, PROP24_Z, config.phases, PROP24_DEPTH, config.steps)
    inputs = {**_model_inputs(model), "z": [PROP24_Z.real, PROP24_Z.imag], "phases": config.phases, "depth": PROP24_DEPTH}
    return CheckReport.build("prop24", inputs, [result.lhs], [result.rhs], tolerance)


def _region_ii_boundary(config: VerificationConfig, tolerance: float) -> CheckReport:
    return boundary_approach_check(
        Coupling(*BOUNDARY_START), Coupling(*BOUNDARY_TARGET), config.alpha, BOUNDARY_STEPS,
        config.energy_count, config.steps, config.N, config.M, config.eigensolver, tolerance,
    )


def _rational_approximant(config: VerificationConfig, tolerance: float) -> CheckReport:
    return rational_approximant_check(
        config.model(), config.approximant_order, config.energy_count, config.steps,
        config.N, config.M, config.eigensolver, tolerance,
    )


CHECKS: Dict[str, Callable[[VerificationConfig, float], CheckReport]] = {
    "theorem31": _theorem31,
    "thouless": _thouless,
    "duality_dos": _duality_dos,
    "lambda_swap": _lambda_swap,
    "prop24": _prop24,
    "lemma26": lemma26_check,
    "green_identities": green_identities_check,
    "m_oracle": m_oracle_check,
    "jensen": jensen_check,
    "closed_form_consistency": closed_form_consistency_check,
    "eigensolver": eigensolver_check,
    "region_ii_boundary": _region_ii_boundary,
    "rational_approximant": _rational_approximant,
}


def run_check(name: str, config: VerificationConfig) -> CheckReport:
    """Run one registered check with the config's tolerance; stamps the runtime."""
    if name not in CHECKS:
        raise DomainError(f"unknown check {name!r}")
    started = time.perf_counter()
    report = CHECKS[name](config, config.tolerances[name])
    return report.with_runtime(time.perf_counter() - started)


# ===========================
# Battery
# ===========================

async def full_report_async(config: VerificationConfig, max_concurrent: Optional[int] = None) -> List[CheckReport]:
    """
    Run the configured battery with at most max_concurrent checks at once.

    Each check runs in its own process, terminated when it exceeds its budget.
    A check that raises or times out yields a failed report; the battery
    itself never aborts. Reports come back in battery order.
    """
    semaphore = asyncio.Semaphore(max_concurrent or WORKER_COUNT)

    async def run_with_limit(name: str) -> CheckReport:
        tolerance = config.tolerances[name]
        budget = config.budgets[name]
        async with semaphore:
            logger.info(f"Check {name} started (budget {budget:g}s)")
            try:
                report = await run_in_process_async(run_check, (name, config), timeout=budget)
            except asyncio.TimeoutError:
                logger.warning(f"Check {name} exceeded its budget of {budget:g}s and was stopped")
                return failed_report(name, tolerance, f"timed out after {budget:g}s").with_runtime(budget)
            except WorkerError as e:
                if e.domain:
                    logger.error(f"Check {name} failed: {e}")
                else:
                    logger.error(f"Check {name} crashed: {e}\n{e.remote_traceback}")
                return failed_report(name, tolerance, str(e))
            except Exception as e:
                logger.error(f"Check {name} crashed: {e}", exc_info=True)
                return failed_report(name, tolerance, f"{type(e).__name__}: {e}")

        status = "passed" if report.passed else "FAILED"
        log = logger.info if report.passed else logger.error
        log(f"Check {name} {status}: residual {report.max_abs_residual:.3e} (tolerance {tolerance:g}) in {report.runtime_seconds:.1f}s")
        return report

    return list(await asyncio.gather(*(run_with_limit(name) for name in config.battery)))


def full_report(config: VerificationConfig, max_concurrent: Optional[int] = None) -> List[CheckReport]:
    """Synchronous wrapper around full_report_async."""
    if not config.battery:
        return []
    logger.info(f"Running battery of {len(config.battery)} checks for {config.coupling}")
    reports = asyncio.run(full_report_async(config, max_concurrent))
    passed = sum(r.passed for r in reports)
    logger.info(f"Battery finished: {passed}/{len(reports)} passed")
    return reports
