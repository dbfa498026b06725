"""TOML configuration for systems, grids and time-dependent coefficients.

Example::

    [space]
    m = 2
    sigma = 1
    mu = "1/2"
    M = 2

    [eigen]
    kind = "harmonic1d"

    [[operator]]
    q = "dt1"
    d = { re = "0", im = "7/10" }

    [[operator]]
    q = "dt2"
    d = 0.41421356

Exact rationals are written as strings (``"7/10"``); TOML floats are
treated as inexact. ``q`` is a named symbol (``dt``, ``dt1``, ``dt2``, ...)
or given as ``poly = [{ alpha = [1, 0], re = "1", im = "0" }, ...]``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ._numbers import format_real, parse_complex, parse_real
from .eigen import provider_from_dict
from .exceptions import ConfigError, ContractError
from .spectral_core import Bounds, SpaceParams
from .symbols import OperatorSpec, PolynomialSymbol, SystemSpec, spec_to_config


def _named_symbol(name: str, m: int) -> PolynomialSymbol:
    name = name.strip().lower()
    if name == "dt" and m == 1:
        return PolynomialSymbol.time_derivative(1, 1)
    if name.startswith("dt") and name[2:].isdigit():
        return PolynomialSymbol.time_derivative(int(name[2:]), m)
    raise ConfigError(f"unknown named symbol {name!r} (use dt, dt1, dt2, ...)")


def _operator(data: dict, m: int) -> OperatorSpec:
    if "q" in data and isinstance(data["q"], str):
        q = _named_symbol(data["q"], m)
    else:
        terms = data.get("poly", data.get("q"))
        if not isinstance(terms, list):
            raise ConfigError("operator needs q = '<name>' or poly = [...]")
        coeffs = {}
        for term in terms:
            alpha = tuple(int(a) for a in term["alpha"])
            coeffs[alpha] = parse_complex({"re": term.get("re", 0), "im": term.get("im", 0)})
        q = PolynomialSymbol(coeffs, m)
    return OperatorSpec(q, parse_complex(data.get("d", 0)))


def system_from_dict(data: dict, base_dir=None) -> SystemSpec:
    try:
        params = SpaceParams.from_dict(data.get("space", {}))
        eigen = provider_from_dict(data.get("eigen", {"kind": "harmonic1d"}), base_dir)
        ops = data.get("operator")
        if not ops:
            raise ConfigError("config has no [[operator]] entries")
        return SystemSpec(tuple(_operator(op, params.m) for op in ops), eigen, params)
    except ContractError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad system config: {exc}") from exc


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_system(path) -> SystemSpec:
    path = Path(path)
    return system_from_dict(load_toml(path), path.parent)


def time_system_from_dict(data: dict, base_dir=None):
    """``[[time]]`` tables, one per time variable: ``const``/``cos``/``sin``, ``values`` or ``samples``."""
    from .normal_form import TimeCoefficientSet, TimeDependentSystem, coefficient_from_config

    try:
        params = SpaceParams.from_dict(data.get("space", {}))
        eigen = provider_from_dict(data.get("eigen", {"kind": "harmonic1d"}), base_dir)
        rows = data.get("time")
        if not rows:
            raise ConfigError("config has no [[time]] coefficients")
        coeffs = TimeCoefficientSet([coefficient_from_config(c, base_dir) for c in rows], params.sigma)
        return TimeDependentSystem(coeffs, eigen, params)
    except ContractError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad time-dependent config: {exc}") from exc


def load_time_system(path):
    path = Path(path)
    return time_system_from_dict(load_toml(path), path.parent)


@dataclass(frozen=True)
class RunConfig:
    """Grid and threshold settings, from ``[grid]`` / ``[thresholds]`` with CLI overrides."""

    bounds: Bounds | None = None
    shell_count: int = 8
    delta0: float = 1e-3
    delta1: float = 1e-2
    tol: float = 1e-10
    output_dir: Path = field(default_factory=lambda: Path("."))

    def __post_init__(self):
        for name in ("delta0", "delta1", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.shell_count < 1:
            raise ConfigError("shell count must be positive")


def run_config_from_dict(data: dict, m: int) -> RunConfig:
    grid = data.get("grid", {})
    th = data.get("thresholds", {})
    bounds = None
    if "tau_max" in grid and "j_max" in grid:
        tm = grid["tau_max"]
        tm = tuple(tm) if isinstance(tm, list) else (int(tm),) * m
        bounds = Bounds(tm, int(grid["j_max"]))
    return RunConfig(bounds, int(grid.get("shells", 8)), float(parse_real(th.get("delta0", 1e-3))),
                     float(parse_real(th.get("delta1", 1e-2))), float(parse_real(th.get("tol", 1e-10))))


def dump_toml(data: dict) -> str:
    """Minimal TOML writer for the configs this package produces."""
    lines = []
    tables = {k: v for k, v in data.items() if isinstance(v, dict)}
    arrays = {k: v for k, v in data.items() if isinstance(v, list) and v and isinstance(v[0], dict)}
    for key, value in data.items():
        if key not in tables and key not in arrays:
            lines.append(f"{key} = {_toml_value(value)}")
    for key, table in tables.items():
        lines.append(f"\n[{key}]")
        for k, v in table.items():
            lines.append(f"{k} = {_toml_value(v)}")
    for key, items in arrays.items():
        for item in items:
            lines.append(f"\n[[{key}]]")
            for k, v in item.items():
                lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines).lstrip("\n") + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return _toml_value(format_real(v) if not isinstance(v, complex) else [v.real, v.imag])


def system_to_toml(spec: SystemSpec) -> str:
    return dump_toml(spec_to_config(spec))
