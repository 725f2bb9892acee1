"""
Exception hierarchy shared by all modules.
"""

from typing import Iterable, Optional


class HarperError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HarperError, ValueError):
    """Input outside the domain of an operation."""


class SingularStepError(HarperError, ArithmeticError):
    """A transfer step divides by an off-diagonal entry below the singularity threshold."""

    def __init__(self, index: Optional[int], modulus: float):
        self.index = index
        self.modulus = modulus
        where = f"index {index}" if index is not None else "unknown index"
        super().__init__(f"singular step at {where}: |a| = {modulus:.3e}")


class DegenerateOrbitError(HarperError):
    """Too many singular steps were skipped along the orbit."""

    def __init__(self, skipped: int, steps: int):
        self.skipped = skipped
        self.steps = steps
        super().__init__(
            f"degenerate orbit: {skipped} of {steps} steps skipped "
            f"({100.0 * skipped / max(steps, 1):.3f}%)"
        )


class AccuracyError(HarperError):
    """An adaptive computation did not reach its error target within budget."""

    def __init__(self, estimate: float, error_bound: float, target: float):
        self.estimate = estimate
        self.error_bound = error_bound
        self.target = target
        super().__init__(
            f"accuracy target {target:.1e} not reached: estimate {estimate:.12g}, "
            f"error bound {error_bound:.3e}"
        )


class NumericalError(HarperError, ArithmeticError):
    """Underflow, vanishing Wronskian or singular solve."""


class UnsupportedRegionError(HarperError):
    """No closed-form Lyapunov exponent is known for the region."""


class ConfigError(HarperError, ValueError):
    """Malformed verification config; lists every offending key."""

    def __init__(self, offending_keys: Iterable[str], details: Iterable[str] = ()):
        self.offending_keys = sorted(set(offending_keys))
        self.details = list(details)
        message = f"invalid config keys: {', '.join(self.offending_keys)}"
        if self.details:
            message += " (" + "; ".join(self.details) + ")"
        super().__init__(message)


class WorkerError(HarperError):
    """A job raised inside a worker process; keeps the original type name and traceback text."""

    def __init__(self, type_name: str, message: str, domain: bool, remote_traceback: str = ""):
        self.type_name = type_name
        self.domain = domain
        self.remote_traceback = remote_traceback
        super().__init__(f"{type_name}: {message}")
