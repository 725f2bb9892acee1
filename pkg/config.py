"""
Configuration constants and defaults for the extended Harper model toolkit.
"""

import math
import os

from dotenv import load_dotenv

# Load environment variables from .env file (optional)
load_dotenv()

# Golden mean frequency, Diophantine
GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0


def physical_core_count(cpuinfo_path: str = "/proc/cpuinfo") -> int:
    """Distinct (physical id, core id) pairs in cpuinfo; os.cpu_count() where that is unavailable."""
    cores = set()
    physical = core = None
    try:
        with open(cpuinfo_path, encoding="utf-8") as f:
            for line in f:
                key, _, value = line.partition(":")
                key = key.strip()
                if key == "physical id":
                    physical = value.strip()
                elif key == "core id":
                    core = value.strip()
                elif not key:
                    if core is not None:
                        cores.add((physical, core))
                    physical = core = None
        if core is not None:
            cores.add((physical, core))
    except OSError:
        pass
    return len(cores) or os.cpu_count() or 1


# Worker count for batch jobs (energies, phases, checks)
HARPER_THREADS_STR = os.environ.get("HARPER_THREADS", "")
try:
    WORKER_COUNT = int(HARPER_THREADS_STR) if HARPER_THREADS_STR else physical_core_count()
    if WORKER_COUNT < 1:
        raise ValueError("HARPER_THREADS must be positive")
except ValueError as e:
    raise ValueError(
        f"HARPER_THREADS must be a positive integer, got: {HARPER_THREADS_STR}"
    ) from e

# Optional log file (unset = console only)
LOG_FILE = os.environ.get("HARPER_LOG_FILE") or None
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# ===========================
# Model
# ===========================

SINGULAR_THRESHOLD = 1e-12  # |a_n| at or below this is a singular step
REGION_TOL = 1e-9  # absolute tolerance for region boundaries
REGION_TAGS = ("I", "II", "III")

# Jensen quadrature
ZERO_RADIUS_TOL = 1e-3  # roots of c this close to the unit circle become panel breakpoints
QUAD_TOL = 1e-8
QUAD_DEGREES = (6, 8, 10)  # escalating tanh-sinh node budgets

# ===========================
# Cocycle
# ===========================

LE_BLOCKS = 20  # blocks for the standard error of the LE estimate
MAX_SKIP_FRACTION = 1e-3  # more skipped steps than this is a degenerate orbit
LE_CLAMP_WARN = -1e-3  # raw estimates below this are logged when clamped
EPSILON_LADDER = (1e-1, 1e-2, 1e-3)

# ===========================
# Spectrum
# ===========================

DEFAULT_BINS = 256
EIGEN_TOL = 1e-12
EIGENSOLVERS = ("bisect", "lapack")
DOS_MARGIN = 0.1  # histogram range padding around the pooled eigenvalues

# ===========================
# m-functions and Green's functions
# ===========================

DEFAULT_DEPTH = 2000
DEPTH_REFERENCE_IM = 0.1  # depth scales as DEFAULT_DEPTH * DEPTH_REFERENCE_IM / Im z below this
MAX_SCALED_DEPTH = 2_000_000
UNDERFLOW_LIMIT = 1e-300
WRONSKIAN_FLOOR = 1e-300
STABLE_RTOL = 1e-2  # ladder stabilization for the limiting m-function diagnostic

# ===========================
# Verification
# ===========================

# Registered checks, in battery order
REGISTERED_CHECKS = (
    "theorem31",
    "thouless",
    "duality_dos",
    "lambda_swap",
    "prop24",
    "lemma26",
    "green_identities",
    "m_oracle",
    "jensen",
    "closed_form_consistency",
    "eigensolver",
    "region_ii_boundary",
    "rational_approximant",
)

# Default tolerance per check
DEFAULT_TOLERANCES = {
    "theorem31": 0.03,
    "thouless": 0.05,
    "duality_dos": 0.02,
    "lambda_swap": 0.03,
    "prop24": 1e-2,
    "lemma26": 1e-6,
    "green_identities": 1e-8,
    "m_oracle": 1e-10,
    "jensen": 1e-4,
    "closed_form_consistency": 1e-10,
    "eigensolver": 1e-10,
    "region_ii_boundary": 0.02,
    "rational_approximant": math.inf,  # informational
}

# Wall-clock budget per check in seconds
DEFAULT_BUDGETS = {
    "theorem31": 120.0,
    "thouless": 120.0,
    "duality_dos": 120.0,
    "lambda_swap": 120.0,
    "prop24": 60.0,
    "lemma26": 10.0,
    "green_identities": 10.0,
    "m_oracle": 10.0,
    "jensen": 30.0,
    "closed_form_consistency": 10.0,
    "eigensolver": 30.0,
    "region_ii_boundary": 120.0,
    "rational_approximant": 120.0,
}

# Default verification settings (flat key = value config overrides these)
DEFAULT_SETTINGS = {
    "l1": 0.0,
    "l2": 0.5,
    "l3": 0.0,
    "alpha": GOLDEN_MEAN,
    "theta": 0.0,
    "N": 500,
    "M": 20,
    "steps": 100_000,
    "depth": DEFAULT_DEPTH,
    "energy_count": 10,
    "phases": 10_000,
    "bins": DEFAULT_BINS,
    "eigensolver": "lapack",
    "battery": list(REGISTERED_CHECKS[:-1]),
    "output_path": "",
    "format": "json",
    "seed": 20240601,
    "approximant_order": 0,  # 0 = skip the rational-approximant run
    "record_timings": False,
}

OUTPUT_FORMATS = ("csv", "json")
SIGNIFICANT_DIGITS = 17

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# ===========================
# Check budgets
# ===========================

ORACLE_MODELS = 20  # random models for m_oracle and green_identities
LEMMA26_MODELS = 10
JENSEN_SAMPLES = 100
CONSISTENCY_SAMPLES = 1000
EIGENSOLVER_SAMPLES = 100
INTERLACE_N = 200
RANDOM_IM_Z = 0.5  # Im z for the random-model identity checks
PROP24_Z = complex(0.5, 0.1)
PROP24_DEPTH = 500  # Riccati depth per phase
LIMITING_M_PHASES = 16  # phases for the limiting m_+ metric attached to theorem31 (0 = off)
THOULESS_FAR_E = 10.0
THOULESS_SAMPLES = 3  # spectrum samples besides the far energy
THOULESS_EXCLUSION = 1e-8  # pooled eigenvalues this close to E are left out of the log potential
BOUNDARY_START = (0.3, 1.5, 0.2)  # interior of region II
BOUNDARY_TARGET = (0.3, 1.0, 0.2)  # on the I/II boundary
BOUNDARY_STEPS = 3

# Diophantine witness logged with each report: |sin 2 pi j alpha| > b / j^r for j <= J
WITNESS_R = 2.0
WITNESS_B = 1e-2
WITNESS_J = 10_000
