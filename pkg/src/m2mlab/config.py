"""Flat key=value experiment files.

One `key = value` per line, `#` starts a comment. Keys must match the
ScenarioConfig / SweepSpec field names exactly; unknown keys are an error
so a misspelled knob can never silently fall back to a default.
"""

from __future__ import annotations

import math

from .errors import ParameterError
from .harness import SweepSpec
from .sim import ScenarioConfig


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ParameterError(f"expected a boolean, got {raw!r}")


def _parse_float(raw: str) -> float:
    if raw.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise ParameterError(f"expected a number, got {raw!r}") from None


def _parse_int(raw: str) -> int:
    try:
        return int(raw, 0)
    except ValueError:
        raise ParameterError(f"expected an integer, got {raw!r}") from None


def _parse_list(raw: str, item):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ParameterError(f"expected a nonempty comma list, got {raw!r}")
    return tuple(item(p) for p in parts)


_SCENARIO_PARSERS = {
    "n_peers": _parse_int,
    "threads_per_peer": _parse_int,
    "uplink_bps": _parse_float,
    "downlink_bps": _parse_float,
    "mean_data_bytes": _parse_float,
    "tp": _parse_float,
    "tout": _parse_float,
    "sim_duration": _parse_float,
    "warmup": _parse_float,
    "seed": _parse_int,
    "resample_size_per_link": _parse_bool,
    "thread_overrides": lambda raw: _parse_list(raw, _parse_int),
    "fixed_size_bytes": _parse_float,
}

_SWEEP_PARSERS = {
    "m_values": lambda raw: _parse_list(raw, _parse_int),
    "tout_values": lambda raw: _parse_list(raw, _parse_float),
    "seeds": lambda raw: _parse_list(raw, _parse_int),
    "modes": lambda raw: _parse_list(raw, str),
    "metric": str,
}


def _read_pairs(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ParameterError(f"{path}:{lineno}: expected key = value")
            key, _, value = body.partition("=")
            key = key.strip()
            value = value.strip()
            if key in pairs:
                raise ParameterError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = value
    return pairs


def _convert(pairs: dict[str, str], parsers: dict, path: str) -> dict:
    out = {}
    for key, raw in pairs.items():
        try:
            out[key] = parsers[key](raw)
        except ParameterError as exc:
            raise ParameterError(f"{path}: key {key!r}: {exc}") from None
    return out


def _build_scenario(pairs: dict, path: str) -> ScenarioConfig:
    try:
        return ScenarioConfig(**_convert(pairs, _SCENARIO_PARSERS, path))
    except TypeError:
        missing = {"n_peers", "threads_per_peer"} - set(pairs)
        raise ParameterError(f"{path}: missing required keys {sorted(missing)}") from None


def load_scenario(path: str) -> ScenarioConfig:
    """Scenario file: ScenarioConfig field names only."""
    pairs = _read_pairs(path)
    unknown = set(pairs) - set(_SCENARIO_PARSERS)
    if unknown:
        raise ParameterError(f"{path}: unknown keys {sorted(unknown)}")
    cfg = _build_scenario(pairs, path)
    cfg.validate()
    return cfg


def load_sweep(path: str) -> SweepSpec:
    """Sweep file: ScenarioConfig fields plus the SweepSpec grid fields."""
    pairs = _read_pairs(path)
    known = set(_SCENARIO_PARSERS) | set(_SWEEP_PARSERS)
    unknown = set(pairs) - known
    if unknown:
        raise ParameterError(f"{path}: unknown keys {sorted(unknown)}")
    scenario_pairs = {k: v for k, v in pairs.items() if k in _SCENARIO_PARSERS}
    sweep_pairs = {k: v for k, v in pairs.items() if k in _SWEEP_PARSERS}
    scenario = _build_scenario(scenario_pairs, path)
    spec = SweepSpec(scenario=scenario, **_convert(sweep_pairs, _SWEEP_PARSERS, path))
    spec.validate()
    return spec
