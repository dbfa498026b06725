"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import numbers

from .exceptions import ContractError, ShapeError
from .spectral_core import Bounds, SpaceParams, SpectralField


def check_field(x, name="field") -> SpectralField:
    if not isinstance(x, SpectralField):
        raise ShapeError(f"{name} must be a SpectralField, got {type(x).__name__}")
    return x


def check_system(spec, name="spec"):
    from .symbols import SystemSpec

    if not isinstance(spec, SystemSpec):
        raise ShapeError(f"{name} must be a SystemSpec, got {type(spec).__name__}")
    return spec


def check_params(params, m=None) -> SpaceParams:
    if params is None:
        return SpaceParams(m=m or 1)
    if not isinstance(params, SpaceParams):
        raise ShapeError(f"params must be SpaceParams, got {type(params).__name__}")
    if m is not None and params.m != m:
        raise ShapeError(f"params have m={params.m}, data has m={m}")
    return params


def check_bounds(bounds, m=None) -> Bounds:
    if not isinstance(bounds, Bounds):
        raise ShapeError(f"bounds must be Bounds, got {type(bounds).__name__}")
    if m is not None and bounds.m != m:
        raise ShapeError(f"bounds have m={bounds.m}, expected {m}")
    return bounds


def check_positive(value, name, integer=False, minimum=None):
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ContractError(f"{name} must be a {'integer' if integer else 'number'}, got {value!r}",
                            contract=f"{name} > 0")
    if value <= 0 or (minimum is not None and value < minimum):
        bound = minimum if minimum is not None else 0
        raise ContractError(f"{name} must be >= {bound}, got {value}", contract=f"{name} >= {bound}")
    return value
