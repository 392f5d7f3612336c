"""Scenario configuration: JSON documents or flat `key = value` files.

Parsing is strict. Every scenario has a fixed set of keys; unknown keys,
duplicate keys and malformed values are errors carrying the file and line.
"""

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

SCENARIOS = ("consecutive", "contrast", "decohere", "recohere",
             "coarse-grain", "classical", "verify")
FORMATS = ("csv", "json")
DEFAULT_TOLERANCE = 1e-10

# keys accepted by every scenario, outside its parameter map
COMMON_KEYS = ("scenario", "seed", "tolerance", "output", "format")


@dataclass(frozen=True)
class ConfigLocation:
    """Location in a config file for error reporting."""
    filename: str
    line: int = 0

    def __str__(self) -> str:
        if self.line:
            return f"{self.filename}:{self.line}"
        return self.filename


class ConfigError(Exception):
    """Malformed or invalid scenario configuration."""
    def __init__(self, message: str, location: ConfigLocation):
        self.location = location
        super().__init__(f"{location}: {message}")


def _complex(text: Any) -> complex:
    if isinstance(text, (int, float, complex)) and not isinstance(text, bool):
        return complex(text)
    if isinstance(text, list) and len(text) == 2:
        return complex(float(text[0]), float(text[1]))
    return complex(str(text).replace(" ", ""))


def _items(value: Any) -> List[Any]:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [part.strip() for part in str(value).split(",") if part.strip()]


def _int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{value} is not an integer")
    return int(value)


def _float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError("boolean is not a number")
    result = float(value)
    if not math.isfinite(result):
        raise ValueError(f"{value} is not finite")
    return result


def _amplitudes(value: Any) -> Tuple[complex, ...]:
    amps = tuple(_complex(item) for item in _items(value))
    if len(amps) != 2:
        raise ValueError(f"expected two amplitudes, got {len(amps)}")
    return amps


def _float_list(value: Any) -> Optional[Tuple[float, ...]]:
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    return tuple(_float(item) for item in _items(value))


def _int_list(value: Any) -> Tuple[int, ...]:
    return tuple(_int(item) for item in _items(value))


def _choice(*options: str) -> Callable[[Any], str]:
    def convert(value: Any) -> str:
        text = str(value).strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got '{text}'")
        return text
    return convert


def _string(value: Any) -> str:
    text = str(value).strip()
    if not text:
        raise ValueError("empty string")
    return text


@dataclass(frozen=True)
class Param:
    convert: Callable[[Any], Any]
    default: Any = None


HALF = 1 / math.sqrt(2)

SCHEMAS: Dict[str, Dict[str, Param]] = {
    "consecutive": {
        "amplitudes": Param(_amplitudes, (HALF, HALF)),
        "second": Param(_choice("x", "z"), "x"),
    },
    "contrast": {
        "amplitudes": Param(_amplitudes, (0.6, 0.8)),
    },
    "decohere": {
        "bath_size": Param(_int, 8),
        "couplings": Param(_float_list, None),
        "amplitudes": Param(_amplitudes, (HALF, HALF)),
        "t_max": Param(_float, 50.0),
        "samples": Param(_int, 100),
        "retained": Param(_string, "S"),
        "threshold": Param(_float, 1 / math.e),
        "window": Param(_float, 0.5),
        "epsilon": Param(_float, 0.05),
        "workers": Param(_int, 1),
    },
    "recohere": {
        "bath_size": Param(_int, 4),
        "coupling": Param(_float, 1.0),
        "amplitudes": Param(_amplitudes, (HALF, HALF)),
        "t_max": Param(_float, 2 * math.pi),
        "samples": Param(_int, 65),
    },
    "coarse-grain": {
        "dims": Param(_int_list, (2, 2)),
        "samples": Param(_int, 50),
        "t_max": Param(_float, 1.0),
        "steps": Param(_int, 5),
    },
    "classical": {
        "resolution": Param(_int, 256),
        "blocks": Param(_int, 4),
        "steps": Param(_int, 10),
        "initial": Param(_choice("left-half", "uniform", "random"), "left-half"),
    },
    "verify": {
        "dims": Param(_int_list, (2, 3)),
        "samples": Param(_int, 200),
    },
}


def _needs_seed(scenario: str, parameters: Mapping[str, Any]) -> bool:
    if scenario in ("coarse-grain", "verify"):
        return True
    if scenario == "decohere":
        return parameters["couplings"] is None
    if scenario == "classical":
        return parameters["initial"] == "random"
    return False


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    tolerance: float = DEFAULT_TOLERANCE
    output: Optional[str] = None
    format: str = "csv"
    filename: str = "<command line>"

    def echo(self) -> Dict[str, Any]:
        """Parameters and common settings as plain JSON-compatible values."""
        result = {"scenario": self.scenario, "seed": self.seed, "tolerance": self.tolerance}
        for key, value in sorted(self.parameters.items()):
            result[key] = _plain(value)
        return result


def _plain(value: Any) -> Any:
    if isinstance(value, complex):
        return value.real if value.imag == 0 else str(value)
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def build_config(scenario: str, raw: Mapping[str, Any], filename: str = "<command line>",
                 lines: Optional[Mapping[str, int]] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    """Validate raw values against the scenario's schema and apply defaults.

    `overrides` holds command-line values for the common keys; None entries
    are ignored.
    """
    lines = lines or {}

    def where(key: Optional[str] = None) -> ConfigLocation:
        return ConfigLocation(filename, lines.get(key, 0) if key else 0)

    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario '{scenario}'", where("scenario"))
    schema = SCHEMAS[scenario]
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    parameters = {}
    for key, value in merged.items():
        if key in COMMON_KEYS:
            continue
        if key not in schema:
            raise ConfigError(f"unknown key '{key}' for scenario '{scenario}'", where(key))
        try:
            parameters[key] = schema[key].convert(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for '{key}': {e}", where(key))
    for key, param in schema.items():
        parameters.setdefault(key, param.default)

    try:
        seed = None if merged.get("seed") is None else _int(merged["seed"])
        tolerance = _float(merged.get("tolerance", DEFAULT_TOLERANCE))
        fmt = _choice(*FORMATS)(merged.get("format", "csv"))
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), where())
    if tolerance <= 0:
        raise ConfigError(f"tolerance must be positive, got {tolerance}", where("tolerance"))
    if seed is None and _needs_seed(scenario, parameters):
        raise ConfigError(f"seed required for scenario '{scenario}'", where())
    output = merged.get("output")
    return ScenarioConfig(scenario, parameters, seed, tolerance,
                          None if output is None else str(output), fmt, filename)


def _parse_flat(text: str, filename: str) -> Tuple[Dict[str, Any], Dict[str, int]]:
    values: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'",
                              ConfigLocation(filename, number))
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key", ConfigLocation(filename, number))
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", ConfigLocation(filename, number))
        values[key] = value
        lines[key] = number
    return values, lines


def _parse_json(text: str, filename: str) -> Tuple[Dict[str, Any], Dict[str, int]]:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e.msg}", ConfigLocation(filename, e.lineno))
    if not isinstance(document, dict):
        raise ConfigError("top level must be an object", ConfigLocation(filename, 1))
    values = {key: value for key, value in document.items() if key != "parameters"}
    nested = document.get("parameters", {})
    if not isinstance(nested, dict):
        raise ConfigError("'parameters' must be an object", ConfigLocation(filename, 1))
    for key, value in nested.items():
        if key in values:
            raise ConfigError(f"duplicate key '{key}'", ConfigLocation(filename, 1))
        values[key] = value
    source = text.splitlines()
    lines = {}
    for key in values:
        needle = json.dumps(key)
        lines[key] = next((n for n, line in enumerate(source, start=1) if needle in line), 0)
    return values, lines


def parse_config_text(text: str, filename: str = "<input>",
                      scenario: Optional[str] = None,
                      overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    """Parse a config document; `scenario` must agree with the document's own."""
    if text.lstrip().startswith("{"):
        values, lines = _parse_json(text, filename)
    else:
        values, lines = _parse_flat(text, filename)
    declared = values.get("scenario")
    if declared is None and scenario is None:
        raise ConfigError("missing required key 'scenario'", ConfigLocation(filename))
    if declared is not None and scenario is not None and declared != scenario:
        raise ConfigError(f"config is for scenario '{declared}', not '{scenario}'",
                          ConfigLocation(filename, lines.get("scenario", 0)))
    return build_config(declared or scenario, values, filename, lines, overrides)


def parse_config(path: str, scenario: Optional[str] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> ScenarioConfig:
    """Read a config file; '-' reads standard input."""
    if path == "-":
        return parse_config_text(sys.stdin.read(), "<stdin>", scenario, overrides)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", ConfigLocation(path))
    return parse_config_text(text, path, scenario, overrides)
