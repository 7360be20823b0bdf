"""Line-oriented experiment configuration.

Format: ``[section]`` headers, ``key = value`` lines, ``#`` comment lines
(whole-line only), UTF-8.  Sections are ``[geometry]``, ``[experiment]`` and
one optional ``[solver.<name>]`` per solver.  Unknown sections or keys,
duplicate keys and malformed values are hard errors that cite line numbers.

Minimal valid file::

    [geometry]
    m = 32
    n_angles = 60
    n_beams = 45

    [experiment]
    solvers = ista, newton

Defaults fill in everything else: noise_levels = 0.1, repetitions = 1,
seed = 0, out = results, timing = wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .tomo import TomoGeometry

SOLVER_NAMES = ("ista", "fista", "gd", "lm", "newton", "transformed-ista")

_TIMING_MODES = ("wall", "off")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    geometry: TomoGeometry
    solvers: list
    noise_levels: list = field(default_factory=lambda: [0.1])
    repetitions: int = 1
    seed: int = 0
    out: str = "results"
    timing: str = "wall"
    solver_overrides: dict = field(default_factory=dict)


def _parse_int(text, line_no, key):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} must be an integer, got '{text}'") from None


def _parse_float(text, line_no, key):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} must be a number, got '{text}'") from None


def _parse_float_or_auto(text, line_no, key):
    if text == "auto":
        return "auto"
    return _parse_float(text, line_no, key)


def _parse_str_list(text, line_no, key):
    items = [part.strip() for part in text.split(",")]
    items = [part for part in items if part]
    if not items:
        raise ConfigError(f"line {line_no}: {key} must list at least one item")
    return items


def _parse_float_list(text, line_no, key):
    return [_parse_float(part, line_no, key) for part in _parse_str_list(text, line_no, key)]


_GEOMETRY_KEYS = {"m": _parse_int, "n_angles": _parse_int, "n_beams": _parse_int,
                  "spacing": _parse_float}
_EXPERIMENT_KEYS = {"solvers": _parse_str_list, "noise_levels": _parse_float_list,
                    "repetitions": _parse_int, "seed": _parse_int,
                    "out": lambda t, n, k: t, "timing": lambda t, n, k: t}
_SOLVER_KEYS = {
    "alpha": _parse_float_or_auto,
    "epsilon": _parse_float_or_auto,
    "tau": _parse_float,
    "omega": _parse_float_or_auto,
    "beta": _parse_float,
    "max_iter": _parse_int,
    "inner_tol": _parse_float,
    "grad_tol": _parse_float,
    "warm_start": _parse_int,
    "lm_alpha0": _parse_float_or_auto,
    "lm_decay": _parse_float,
    "lm_floor": _parse_float,
    "armijo_t0": _parse_float,
    "armijo_shrink": _parse_float,
    "armijo_slope": _parse_float,
    "variant": lambda t, n, k: t,
}


def _section_schema(section, line_no):
    if section == "geometry":
        return _GEOMETRY_KEYS
    if section == "experiment":
        return _EXPERIMENT_KEYS
    if section.startswith("solver."):
        name = section[len("solver."):]
        if name not in SOLVER_NAMES:
            raise ConfigError(
                f"line {line_no}: unknown solver '{name}'; available: {', '.join(SOLVER_NAMES)}"
            )
        return _SOLVER_KEYS
    raise ConfigError(f"line {line_no}: unknown section [{section}]")


def parse_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; raises ConfigError on any defect."""
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.readlines()

    entries = {}  # (section, key) -> (value, line_no)
    section = None
    schema = None
    for line_no, raw in enumerate(raw_lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {line_no}: malformed section header '{line}'")
            section = line[1:-1].strip()
            schema = _section_schema(section, line_no)
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got '{line}'")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key not in schema:
            raise ConfigError(f"line {line_no}: unknown key '{key}' in section [{section}]")
        if (section, key) in entries:
            first = entries[(section, key)][1]
            raise ConfigError(
                f"line {line_no}: duplicate key '{key}' in section [{section}] "
                f"(first set on line {first})"
            )
        entries[(section, key)] = (schema[key](value, line_no, key), line_no)

    def take(section, key, default=None):
        return entries.pop((section, key), (default, None))

    required = [("geometry", "m"), ("geometry", "n_angles"), ("geometry", "n_beams"),
                ("experiment", "solvers")]
    for sec, key in required:
        if (sec, key) not in entries:
            raise ConfigError(f"missing required key '{key}' in section [{sec}]")

    m, _ = take("geometry", "m")
    n_angles, _ = take("geometry", "n_angles")
    n_beams, _ = take("geometry", "n_beams")
    spacing, _ = take("geometry", "spacing")
    try:
        geometry = TomoGeometry(m, n_angles, n_beams, spacing)
    except ValueError as exc:
        raise ConfigError(f"invalid geometry: {exc}") from None

    solvers, solvers_line = take("experiment", "solvers")
    for name in solvers:
        if name not in SOLVER_NAMES:
            raise ConfigError(
                f"line {solvers_line}: unknown solver '{name}'; "
                f"available: {', '.join(SOLVER_NAMES)}"
            )
    noise_levels, noise_line = take("experiment", "noise_levels", [0.1])
    for level in noise_levels:
        if level < 0.0:
            raise ConfigError(f"line {noise_line}: noise levels must be >= 0")
    repetitions, rep_line = take("experiment", "repetitions", 1)
    if repetitions < 0:
        raise ConfigError(f"line {rep_line}: repetitions must be >= 0")
    seed, _ = take("experiment", "seed", 0)
    out, _ = take("experiment", "out", "results")
    timing, timing_line = take("experiment", "timing", "wall")
    if timing not in _TIMING_MODES:
        raise ConfigError(
            f"line {timing_line}: timing must be one of {', '.join(_TIMING_MODES)}"
        )

    overrides = {}
    for (sec, key), (value, line_no) in entries.items():
        name = sec[len("solver."):]
        if key == "tau" and value <= 1.0:
            raise ConfigError(f"line {line_no}: tau must exceed 1")
        if key == "variant" and value not in ("nesterov-t", "beta"):
            raise ConfigError(
                f"line {line_no}: variant must be 'nesterov-t' or 'beta', got '{value}'"
            )
        overrides.setdefault(name, {})[key] = value

    return ExperimentConfig(geometry, solvers, noise_levels, repetitions,
                            seed, out, timing, overrides)
