"""
Command-line entry point for the extended Harper model toolkit.

Subcommands:
  le       Lyapunov exponents on an energy grid or at spectrum samples
  dos      density-of-states histogram from pooled truncations
  verify   run the verification battery from a config file
  regions  region tags, dual couplings, Jensen integrals and closed-form LE

Exit codes: 0 success, 1 computational or check failure, 2 usage or config error.
"""

import argparse
import logging
import math
import sys
from typing import List, Optional, Sequence

import numpy as np

from cocycle import lyapunov_curve
from config import (
    DEFAULT_BINS,
    DEFAULT_SETTINGS,
    EIGENSOLVERS,
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    LOG_FILE,
    LOG_FORMAT,
    OUTPUT_FORMATS,
    WORKER_COUNT,
)
from errors import ConfigError, DomainError, HarperError, UnsupportedRegionError
from model import (
    ConstantModel,
    Coupling,
    HarperModel,
    JacobiFamily,
    classify_region,
    golden_or_float,
    jensen_log_integral_closed,
    sigma_dual,
)
from settings_manager import SettingsManager
from spectrum import dos_estimate, spectrum_samples
from verify import closed_form_le, full_report
from writers import report_columns, report_rows, write_output

logger = logging.getLogger("main")


def setup_logging(level: int = logging.INFO, log_file: Optional[str] = LOG_FILE):
    """Configure the root logger: stderr console handler plus an optional file handler."""
    root = logging.getLogger()
    if root.handlers:
        root.setLevel(level)
        return root

    root.setLevel(level)

    # stdout carries CSV/JSON when no output path is given
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)

    return root


class UsageError(Exception):
    """Bad flag combination detected after argparse."""


# ===========================
# Argument helpers
# ===========================

def _alpha(text: str) -> float:
    try:
        value = golden_or_float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number or 'golden', got {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0,1), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _add_model_args(parser: argparse.ArgumentParser):
    parser.add_argument("--model", choices=("harper", "free"), default="harper",
                        help="harper (default) or the free Laplacian a=1, b=0")
    parser.add_argument("--l1", type=float, help="lambda1")
    parser.add_argument("--l2", type=float, help="lambda2")
    parser.add_argument("--l3", type=float, help="lambda3")
    parser.add_argument("--alpha", type=_alpha, default=DEFAULT_SETTINGS["alpha"],
                        help="frequency in (0,1) or 'golden' (default)")
    parser.add_argument("--theta", type=float, default=0.0, help="phase in [0,1)")


def _add_output_args(parser: argparse.ArgumentParser, default_format: str = "csv"):
    parser.add_argument("--output", default="", help="output file (default: stdout)")
    parser.add_argument("--format", choices=OUTPUT_FORMATS, default=default_format)


def _add_truncation_args(parser: argparse.ArgumentParser):
    parser.add_argument("--N", type=_positive_int, default=DEFAULT_SETTINGS["N"], help="truncation size")
    parser.add_argument("--M", type=_positive_int, default=DEFAULT_SETTINGS["M"], help="number of phases")
    parser.add_argument("--eigensolver", choices=EIGENSOLVERS, default=DEFAULT_SETTINGS["eigensolver"])


def _coupling(args) -> Coupling:
    if None in (args.l1, args.l2, args.l3):
        raise UsageError("--l1, --l2 and --l3 are required")
    return Coupling(args.l1, args.l2, args.l3)


def _model(args) -> JacobiFamily:
    if args.model == "free":
        return ConstantModel()
    return HarperModel(_coupling(args), args.alpha, args.theta)


def _model_record(args) -> dict:
    if args.model == "free":
        return {"model": "free"}
    return {"model": "harper", "l1": args.l1, "l2": args.l2, "l3": args.l3, "alpha": args.alpha, "theta": args.theta}


def parse_energies(spec: str, model: JacobiFamily, N: int, M: int, method: str) -> List[complex]:
    """
    `spectrum:K` (K spectrum samples), `grid:lo:hi:K` (K evenly spaced reals),
    or a comma-separated list of numbers (complex allowed, e.g. 0.5+0.1j).
    """
    kind, _, rest = spec.partition(":")
    try:
        if kind == "spectrum":
            return [complex(e) for e in spectrum_samples(model, N, M, int(rest), method)]
        if kind == "grid":
            lo, hi, count = rest.split(":")
            return [complex(e) for e in np.linspace(float(lo), float(hi), int(count))]
        values = [complex(part.strip().replace(" ", "")) for part in spec.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"bad energy specification {spec!r}: {e}") from e
    if not values:
        raise UsageError("energy list is empty")
    return values


# ===========================
# Subcommands
# ===========================

def cmd_le(args) -> int:
    """Energy / LE / stderr table."""
    model = _model(args)
    energies = parse_energies(args.energies, model, args.N, args.M, args.eigensolver)
    logger.info(f"LE at {len(energies)} energies, {args.steps} steps each")
    results = lyapunov_curve(model, energies, args.steps, args.threads)

    rows = []
    failures = 0
    for z, result in zip(energies, results):
        if isinstance(result, BaseException):
            failures += 1
            rows.append({"energy_re": z.real, "energy_im": z.imag, "le": math.nan, "stderr": math.nan,
                         "raw_le": math.nan, "steps": 0, "error": str(result)})
        else:
            rows.append({"energy_re": z.real, "energy_im": z.imag, "le": result.le_estimate,
                         "stderr": result.stderr_estimate, "raw_le": result.raw_estimate,
                         "steps": result.steps, "error": ""})
    columns = ["energy_re", "energy_im", "le", "stderr", "raw_le", "steps", "error"]
    record = {**_model_record(args), "steps": args.steps, "energies": args.energies}
    write_output(rows, columns, args.format, record, args.output)
    if failures:
        logger.error(f"{failures} of {len(energies)} energies failed")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_dos(args) -> int:
    """Histogram (bin_left, bin_right, mass), optionally the raw pool."""
    model = _model(args)
    dos = dos_estimate(model, args.N, args.M, args.bins, args.eigensolver, args.threads)
    rows = [
        {"bin_left": float(left), "bin_right": float(right), "mass": float(mass)}
        for left, right, mass in zip(dos.bin_edges[:-1], dos.bin_edges[1:], dos.masses)
    ]
    record = {**_model_record(args), "truncation_size": args.N, "phase_count": args.M, "bins": args.bins}
    write_output(rows, ["bin_left", "bin_right", "mass"], args.format, record, args.output)
    if args.pool:
        pool_rows = [{"eigenvalue": float(e)} for e in dos.eigenvalues]
        write_output(pool_rows, ["eigenvalue"], args.format, record, args.pool)
    return EXIT_OK


def cmd_verify(args) -> int:
    """Run the battery; exit 0 iff every check passed."""
    manager = SettingsManager(args.config)
    config = manager.config()
    logger.info("\n" + manager.format_current_settings())
    reports = full_report(config, args.threads)

    fmt = args.format or config.format
    output = args.output if args.output is not None else config.output_path
    write_output(
        report_rows(reports, config.record_timings),
        report_columns(config.record_timings),
        fmt,
        config.as_record(),
        output,
    )
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.error(f"Failed checks: {', '.join(failed)}")
        return EXIT_FAILURE
    return EXIT_OK


def region_record(coupling: Coupling) -> dict:
    """Region tag, dual coupling, Jensen integrals and closed-form LE (None where undefined)."""
    region = classify_region(coupling)
    dual = sigma_dual(coupling) if coupling.lambda2 > 0.0 else None
    try:
        le = closed_form_le(coupling)
    except UnsupportedRegionError:
        le = None
    return {
        "l1": coupling.lambda1,
        "l2": coupling.lambda2,
        "l3": coupling.lambda3,
        "region": region.tag,
        "on_boundary": region.on_boundary,
        "dual_l1": dual.lambda1 if dual else None,
        "dual_l2": dual.lambda2 if dual else None,
        "dual_l3": dual.lambda3 if dual else None,
        "dual_region": classify_region(dual).tag if dual else None,
        "jensen": jensen_log_integral_closed(coupling),
        "dual_jensen": jensen_log_integral_closed(dual) if dual else None,
        "closed_form_le": le,
    }


def format_region_line(coupling: Coupling) -> str:
    """e.g. `II, dual=(0.05,0.5,0.1), LE=0`."""
    region = classify_region(coupling)
    dual = str(sigma_dual(coupling)) if coupling.lambda2 > 0.0 else "undefined"
    try:
        tail = f"LE={closed_form_le(coupling):g}"
    except UnsupportedRegionError:
        tail = "no closed form (self-dual region)"
    return f"{region.tag}, dual={dual}, {tail}"


REGION_COLUMNS = ["l1", "l2", "l3", "region", "on_boundary", "dual_l1", "dual_l2", "dual_l3",
                  "dual_region", "jensen", "dual_jensen", "closed_form_le"]


def region_grid(s_max: float, l2_max: float, count: int) -> List[Coupling]:
    """count x count grid over the (l1+l3, l2) plane with l1 = l3, l2 > 0."""
    couplings = []
    for l2 in np.linspace(l2_max / count, l2_max, count):
        for s in np.linspace(0.0, s_max, count):
            couplings.append(Coupling(float(s) / 2.0, float(l2), float(s) / 2.0))
    return couplings


def cmd_regions(args) -> int:
    if args.grid:
        try:
            s_max, l2_max, count = args.grid.split(":")
            couplings = region_grid(float(s_max), float(l2_max), int(count))
        except ValueError as e:
            raise UsageError(f"bad grid {args.grid!r}, expected S_MAX:L2_MAX:K: {e}") from e
        rows = []
        for coupling in couplings:
            row = region_record(coupling)
            row["closed_form_le"] = math.nan if row["closed_form_le"] is None else row["closed_form_le"]
            rows.append(row)
        write_output(rows, REGION_COLUMNS, args.format or "csv", {"grid": args.grid}, args.output)
        return EXIT_OK

    coupling = _coupling(args)
    if args.format:
        write_output([region_record(coupling)], REGION_COLUMNS, args.format, {}, args.output)
    else:
        print(format_region_line(coupling))
    return EXIT_OK


# ===========================
# Parser
# ===========================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harper",
        description="Lyapunov exponents, density of states and duality checks for the extended Harper model",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help=f"worker count (default: HARPER_THREADS or {WORKER_COUNT})")
    sub = parser.add_subparsers(dest="command", required=True)

    le = sub.add_parser("le", help="Lyapunov exponents")
    _add_model_args(le)
    _add_truncation_args(le)
    le.add_argument("--energies", required=True, help="spectrum:K | grid:LO:HI:K | E1,E2,...")
    le.add_argument("--steps", type=_positive_int, default=DEFAULT_SETTINGS["steps"])
    _add_output_args(le)
    le.set_defaults(handler=cmd_le)

    dos = sub.add_parser("dos", help="density of states")
    _add_model_args(dos)
    _add_truncation_args(dos)
    dos.add_argument("--bins", type=_positive_int, default=DEFAULT_BINS)
    dos.add_argument("--pool", default="", help="also write the raw eigenvalue pool to this file")
    _add_output_args(dos)
    dos.set_defaults(handler=cmd_dos)

    ver = sub.add_parser("verify", help="run the verification battery")
    ver.add_argument("--config", default=None, help="key = value config file (default: built-in defaults)")
    ver.add_argument("--output", default=None, help="report file (default: output_path from the config, else stdout)")
    ver.add_argument("--format", choices=OUTPUT_FORMATS, default=None)
    ver.set_defaults(handler=cmd_verify)

    reg = sub.add_parser("regions", help="region tags and closed-form LE")
    reg.add_argument("--l1", type=float)
    reg.add_argument("--l2", type=float)
    reg.add_argument("--l3", type=float)
    reg.add_argument("--grid", default="", help="S_MAX:L2_MAX:K grid over the (l1+l3, l2) plane")
    reg.add_argument("--output", default="")
    reg.add_argument("--format", choices=OUTPUT_FORMATS, default=None)
    reg.set_defaults(handler=cmd_regions)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)

    try:
        return args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(str(e))
        return EXIT_USAGE
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        for key in e.offending_keys:
            print(f"offending key: {key}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except HarperError as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_FAILURE
    except ArithmeticError as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
