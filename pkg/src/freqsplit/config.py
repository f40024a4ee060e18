"""
Run configuration: a flat TOML document whose keys carry their units.

The packaged calibration bundle supplies every default; a user file may
override any subset. Unknown keys and wrongly typed values are errors.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .circuit import CircuitConfig
from .converter import ConverterParams
from .errors import ConfigError, DomainError

# key -> (type, target, field name); target is "circuit", "converter" or "run"
KEYS = {
    "saturation_a": (float, "converter", "A"),
    "pump_coupling_per_mw": (float, "converter", "eta"),
    "pump_phase_rad": (float, "converter", "phi_pump"),
    "noise_telecom_hz_per_mw": (float, "converter", "kappa_tel"),
    "noise_visible_hz_per_mw2": (float, "converter", "kappa_vis2"),
    "noise_visible_hz_per_mw": (float, "converter", "kappa_vis1"),
    "leak_hz": (float, "converter", "leak0"),
    "leak_hz_per_alpha2": (float, "converter", "leak1"),
    "leak_telecom_fraction": (float, "converter", "leak_tel_fraction"),
    "alpha2": (float, "circuit", "alpha2"),
    "pump_power_mw": (float, "circuit", "pump_P"),
    "transmittance_in": (float, "circuit", "T_in"),
    "transmittance_visible": (float, "circuit", "T_V"),
    "transmittance_telecom": (float, "circuit", "T_T"),
    "clock_hz": (float, "circuit", "f_clock"),
    "rep_rate_hz": (float, "circuit", "f_rep"),
    "delay_s": (float, "circuit", "delay"),
    "window_s": (float, "circuit", "window"),
    "phase_offset_rad": (float, "circuit", "phase_offset"),
    "split_ratio": (float, "circuit", "split_ratio"),
    "mode_overlap": (float, "circuit", "mode_overlap"),
    "dark_count_rate_hz": (float, "circuit", "dark_rate"),
    "duration_s": (float, "run", "duration"),
    "scan_points": (int, "run", "scan_points"),
    "points": (int, "run", "points"),
    "degree": (int, "run", "degree"),
    "pump_min_mw": (float, "run", "pump_min"),
    "pump_max_mw": (float, "run", "pump_max"),
    "alpha2_min": (float, "run", "alpha2_min"),
    "alpha2_max": (float, "run", "alpha2_max"),
    "bin_width_s": (float, "run", "bin_width"),
    "input_csv": (str, "run", "input_csv"),
}

OPTIONAL_KEYS = {"points", "degree", "input_csv"}


@dataclass(frozen=True)
class RunSettings:
    duration: float = 1.0
    scan_points: int = 16
    points: Optional[int] = None
    degree: Optional[int] = None
    pump_min: float = 0.0
    pump_max: float = 700.0
    alpha2_min: float = 1e-3
    alpha2_max: float = 1.0
    bin_width: float = 10e-12
    input_csv: Optional[str] = None

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        if self.scan_points < 3:
            raise DomainError("a fringe scan needs at least three phases")
        if self.points is not None and self.points < 1:
            raise DomainError("points must be positive")
        if self.degree is not None and self.degree < 0:
            raise DomainError("degree must be non-negative")
        if not 0 <= self.pump_min <= self.pump_max:
            raise DomainError("need 0 <= pump_min <= pump_max")
        if not 0 < self.alpha2_min <= self.alpha2_max:
            raise DomainError("need 0 < alpha2_min <= alpha2_max")
        if not self.bin_width > 0:
            raise DomainError("bin width must be positive")


@dataclass(frozen=True)
class ResolvedConfig:
    values: Dict[str, Any]
    circuit: CircuitConfig
    converter: ConverterParams
    run: RunSettings


def bundle_text() -> str:
    return resources.files("freqsplit").joinpath("data/calibration.toml").read_text()


def default_values() -> Dict[str, Any]:
    return tomllib.loads(bundle_text())


def _coerce(key: str, value: Any) -> Any:
    kind = KEYS[key][0]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key}: value must be finite")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


def parse_overrides(text: str, source: str = "<config>") -> Dict[str, Any]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    out = {}
    for key, value in doc.items():
        if key not in KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(overrides: Optional[Mapping[str, Any]] = None) -> ResolvedConfig:
    values = {k: _coerce(k, v) for k, v in default_values().items()}
    for key, value in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        if value is None and key in OPTIONAL_KEYS:
            values.pop(key, None)
            continue
        values[key] = _coerce(key, value)
    groups: Dict[str, Dict[str, Any]] = {"circuit": {}, "converter": {}, "run": {}}
    for key, value in values.items():
        _, target, name = KEYS[key]
        groups[target][name] = value
    return ResolvedConfig(
        dict(sorted(values.items())),
        CircuitConfig(**groups["circuit"]),
        ConverterParams(**groups["converter"]),
        RunSettings(**groups["run"]),
    )


def load(path: Optional[Path], extra: Optional[Mapping[str, Any]] = None) -> ResolvedConfig:
    overrides: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        overrides.update(parse_overrides(text, str(path)))
    overrides.update(extra or {})
    return resolve(overrides)


def dumps(values: Mapping[str, Any]) -> str:
    """Serialise a flat config back to TOML, one sorted key per line."""
    lines = []
    for key in sorted(values):
        v = values[key]
        if isinstance(v, str):
            lines.append(f"{key} = {_toml_string(v)}")
        elif isinstance(v, float):
            lines.append(f"{key} = {v!r}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def _toml_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'
