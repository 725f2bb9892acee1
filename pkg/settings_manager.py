"""
Settings manager for verification configs.

Reads the flat `key = value` format (one key per line, `#` comments), merges it
over DEFAULT_SETTINGS and validates every key. Problems are collected and
raised together as one ConfigError.
"""

import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from config import (
    DEFAULT_BUDGETS,
    DEFAULT_SETTINGS,
    DEFAULT_TOLERANCES,
    EIGENSOLVERS,
    OUTPUT_FORMATS,
    REGISTERED_CHECKS,
)
from errors import ConfigError, DomainError
from model import Coupling, HarperModel, golden_or_float

logger = logging.getLogger(__name__)

INT_KEYS = ("N", "M", "steps", "depth", "energy_count", "phases", "bins", "seed", "approximant_order")
POSITIVE_INT_KEYS = ("N", "M", "steps", "depth", "energy_count", "phases", "bins")
FLOAT_KEYS = ("l1", "l2", "l3", "theta")
TEXT_KEYS = ("eigensolver", "output_path", "format")


@dataclass(frozen=True)
class VerificationConfig:
    """Validated verification settings."""
    coupling: Coupling
    alpha: float
    theta: float
    N: int
    M: int
    steps: int
    depth: int
    energy_count: int
    phases: int
    bins: int
    eigensolver: str
    battery: Tuple[str, ...]
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    budgets: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_BUDGETS))
    output_path: str = ""
    format: str = "json"
    seed: int = 0
    approximant_order: int = 0
    record_timings: bool = False

    def model(self, alpha: Optional[float] = None) -> HarperModel:
        return HarperModel(self.coupling, self.alpha if alpha is None else alpha, self.theta)

    def as_record(self) -> Dict[str, Any]:
        """Flat lower_snake_case record for report headers."""
        return {
            "l1": self.coupling.lambda1,
            "l2": self.coupling.lambda2,
            "l3": self.coupling.lambda3,
            "alpha": self.alpha,
            "theta": self.theta,
            "truncation_size": self.N,
            "phase_count": self.M,
            "steps": self.steps,
            "depth": self.depth,
            "energy_count": self.energy_count,
            "phases": self.phases,
            "bins": self.bins,
            "eigensolver": self.eigensolver,
            "battery": list(self.battery),
            "tolerances": {name: self.tolerances[name] for name in self.battery},
            "budgets": {name: self.budgets[name] for name in self.battery},
            "seed": self.seed,
            "approximant_order": self.approximant_order,
        }


def parse_config_text(text: str) -> Tuple[Dict[str, str], List[str]]:
    """Split `key = value` lines; returns raw values and keys of malformed lines."""
    raw: Dict[str, str] = {}
    malformed: List[str] = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            malformed.append(f"line{number}")
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            malformed.append(f"line{number}")
            continue
        raw[key] = value
    return raw, malformed


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_battery(value: str) -> List[str]:
    return [name.strip() for name in value.split(",") if name.strip()]


class SettingsManager:
    """Thread-safe access to a verification config file merged over the defaults."""

    def __init__(self, settings_file: Optional[str] = None):
        self.settings_file = Path(settings_file) if settings_file else None
        self._lock = threading.Lock()
        self._settings: Dict[str, Any] = {}
        self._load_settings()

    def _load_settings(self):
        """Read the file (if any), merge over defaults and validate."""
        with self._lock:
            raw: Dict[str, str] = {}
            malformed: List[str] = []
            if self.settings_file is not None:
                try:
                    text = self.settings_file.read_text(encoding="utf-8")
                except OSError as e:
                    raise ConfigError([str(self.settings_file)], [f"cannot read config: {e}"]) from e
                raw, malformed = parse_config_text(text)
                logger.debug(f"Read {len(raw)} keys from {self.settings_file}")
            self._settings = self._merge(raw, malformed)

    def _merge(self, raw: Dict[str, str], malformed: List[str]) -> Dict[str, Any]:
        settings: Dict[str, Any] = dict(DEFAULT_SETTINGS)
        settings["battery"] = list(DEFAULT_SETTINGS["battery"])
        settings["tolerances"] = dict(DEFAULT_TOLERANCES)
        settings["budgets"] = dict(DEFAULT_BUDGETS)
        bad = list(malformed)
        details: List[str] = []

        for key, value in raw.items():
            try:
                if key in INT_KEYS:
                    settings[key] = int(value)
                elif key in FLOAT_KEYS:
                    settings[key] = float(value)
                elif key == "alpha":
                    settings[key] = golden_or_float(value)
                elif key in TEXT_KEYS:
                    settings[key] = value
                elif key == "battery":
                    settings[key] = _parse_battery(value)
                elif key == "record_timings":
                    settings[key] = _parse_bool(value)
                elif key.startswith("tolerance.") or key.startswith("budget."):
                    prefix, name = key.split(".", 1)
                    if name not in REGISTERED_CHECKS:
                        raise ValueError(f"unknown check {name!r}")
                    target = "tolerances" if prefix == "tolerance" else "budgets"
                    settings[target][name] = float(value)
                else:
                    raise ValueError("unknown key")
            except ValueError as e:
                bad.append(key)
                details.append(f"{key}: {e}")

        bad.extend(self._validate(settings, details))
        if bad:
            raise ConfigError(bad, details)
        return settings

    @staticmethod
    def _validate(settings: Dict[str, Any], details: List[str]) -> List[str]:
        bad = []
        for key in POSITIVE_INT_KEYS:
            if settings[key] < 1:
                bad.append(key)
                details.append(f"{key}: must be positive")
        if settings["approximant_order"] < 0:
            bad.append("approximant_order")
            details.append("approximant_order: must be nonnegative")
        if settings["energy_count"] > settings["N"] * settings["M"]:
            bad.append("energy_count")
            details.append("energy_count: exceeds N*M")
        try:
            Coupling(settings["l1"], settings["l2"], settings["l3"])
        except DomainError as e:
            bad.extend(["l1", "l2", "l3"])
            details.append(str(e))
        if not 0.0 < settings["alpha"] < 1.0:
            bad.append("alpha")
            details.append("alpha: must lie in (0,1)")
        if not 0.0 <= settings["theta"] < 1.0:
            bad.append("theta")
            details.append("theta: must lie in [0,1)")
        if settings["eigensolver"] not in EIGENSOLVERS:
            bad.append("eigensolver")
            details.append(f"eigensolver: expected one of {EIGENSOLVERS}")
        if settings["format"] not in OUTPUT_FORMATS:
            bad.append("format")
            details.append(f"format: expected one of {OUTPUT_FORMATS}")
        unknown = [name for name in settings["battery"] if name not in REGISTERED_CHECKS]
        if unknown:
            bad.append("battery")
            details.append(f"battery: unknown checks {unknown}")
        for name, tol in settings["tolerances"].items():
            if math.isnan(tol) or tol < 0.0:
                bad.append(f"tolerance.{name}")
                details.append(f"tolerance.{name}: must be a nonnegative number")
        for name, budget in settings["budgets"].items():
            if math.isnan(budget) or budget <= 0.0:
                bad.append(f"budget.{name}")
                details.append(f"budget.{name}: must be positive")
        return bad

    # Accessors

    def get(self, key: str) -> Any:
        with self._lock:
            value = self._settings[key]
            return value.copy() if isinstance(value, (list, dict)) else value

    @property
    def battery(self) -> List[str]:
        return self.get("battery")

    def config(self) -> VerificationConfig:
        """Immutable snapshot of the current settings."""
        with self._lock:
            s = self._settings
            return VerificationConfig(
                coupling=Coupling(s["l1"], s["l2"], s["l3"]),
                alpha=s["alpha"],
                theta=s["theta"],
                N=s["N"],
                M=s["M"],
                steps=s["steps"],
                depth=s["depth"],
                energy_count=s["energy_count"],
                phases=s["phases"],
                bins=s["bins"],
                eigensolver=s["eigensolver"],
                battery=tuple(s["battery"]),
                tolerances=dict(s["tolerances"]),
                budgets=dict(s["budgets"]),
                output_path=s["output_path"],
                format=s["format"],
                seed=s["seed"],
                approximant_order=s["approximant_order"],
                record_timings=s["record_timings"],
            )

    def format_current_settings(self) -> str:
        """Human-readable summary of the current settings."""
        cfg = self.config()
        lines = [
            "Verification settings",
            f"  coupling: {cfg.coupling}  alpha: {cfg.alpha:.17g}  theta: {cfg.theta:g}",
            f"  truncation: N={cfg.N} M={cfg.M}  steps: {cfg.steps}  depth: {cfg.depth}",
            f"  energies: {cfg.energy_count}  phases: {cfg.phases}  eigensolver: {cfg.eigensolver}",
            f"  battery ({len(cfg.battery)}):",
        ]
        for name in cfg.battery:
            lines.append(f"    {name}: tolerance {cfg.tolerances[name]:g}, budget {cfg.budgets[name]:g}s")
        if cfg.output_path:
            lines.append(f"  output: {cfg.output_path} ({cfg.format})")
        return "\n".join(lines)
