"""Analytic frame, mode grids and Fourier-Hermite coefficient fields.

A mode ``(tau, j)`` pairs a torus frequency ``tau`` in Z^m with an
eigenfunction index ``j >= 0``. Indices are 0-based; every weight formula
uses ``j + 1`` so that the usual 1-based index conventions are reproduced.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._numbers import format_real, parse_real
from .exceptions import ContractError, ShapeError


@dataclass(frozen=True)
class SpaceParams:
    """Dimensions and regularity indices of the function space.

    Parameters
    ----------
    m, n : int
        Torus and Euclidean dimensions.
    sigma : real
        Gevrey order in time, ``sigma >= 1``.
    mu : real
        Gelfand-Shilov index in space, ``mu >= 1/2``.
    bigM : int
        Order of the spatial operator, ``bigM >= 2``.
    """

    m: int = 1
    n: int = 1
    sigma: float = 1
    mu: float = Fraction(1, 2)
    bigM: int = 2

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ContractError(f"m must be a positive integer, got {self.m}", contract="m >= 1")
        if int(self.n) != self.n or self.n < 1:
            raise ContractError(f"n must be a positive integer, got {self.n}", contract="n >= 1")
        if self.sigma < 1:
            raise ContractError(f"sigma must be >= 1, got {self.sigma}", contract="sigma >= 1")
        if self.mu < Fraction(1, 2):
            raise ContractError(f"mu must be >= 1/2, got {self.mu}", contract="mu >= 1/2")
        if int(self.bigM) != self.bigM or self.bigM < 2:
            raise ContractError(f"M must be an integer >= 2, got {self.bigM}", contract="M >= 2")

    @property
    def tau_exponent(self) -> float:
        return 1.0 / float(self.sigma)

    @property
    def j_exponent(self) -> float:
        return 1.0 / (2.0 * self.n * float(self.mu))

    def to_dict(self):
        return {"m": self.m, "n": self.n, "sigma": format_real(self.sigma),
                "mu": format_real(self.mu), "M": self.bigM}

    @classmethod
    def from_dict(cls, data):
        return cls(m=int(data.get("m", 1)), n=int(data.get("n", 1)),
                   sigma=parse_real(data.get("sigma", 1)),
                   mu=parse_real(data.get("mu", "1/2")),
                   bigM=int(data.get("M", data.get("bigM", 2))))


class ModeIndex(NamedTuple):
    tau: tuple
    j: int


def mode(tau, j) -> ModeIndex:
    if np.isscalar(tau):
        tau = (int(tau),)
    return ModeIndex(tuple(int(t) for t in tau), int(j))


@dataclass(frozen=True)
class Bounds:
    """Rectangular truncation ``|tau_k| <= tau_max[k]``, ``0 <= j <= j_max``."""

    tau_max: tuple
    j_max: int

    def __post_init__(self):
        tm = self.tau_max
        if np.isscalar(tm):
            tm = (int(tm),)
        object.__setattr__(self, "tau_max", tuple(int(t) for t in tm))
        object.__setattr__(self, "j_max", int(self.j_max))

    @classmethod
    def cube(cls, tau_max: int, j_max: int, m: int = 1) -> "Bounds":
        return cls((int(tau_max),) * m, j_max)

    @property
    def m(self) -> int:
        return len(self.tau_max)

    @property
    def is_empty(self) -> bool:
        return self.j_max < 0 or any(t < 0 for t in self.tau_max)

    @property
    def shape(self) -> tuple:
        """Dense array shape: one axis per torus frequency, then ``j``."""
        return tuple(2 * t + 1 for t in self.tau_max) + (self.j_max + 1,)

    @property
    def size(self) -> int:
        return 0 if self.is_empty else int(np.prod(self.shape, dtype=np.int64))

    def contains(self, modes: np.ndarray) -> np.ndarray:
        modes = np.atleast_2d(modes)
        ok = (modes[:, -1] >= 0) & (modes[:, -1] <= self.j_max)
        for k, t in enumerate(self.tau_max):
            ok &= np.abs(modes[:, k]) <= t
        return ok

    def all_modes(self) -> np.ndarray:
        """Every grid mode as an ``(N, m+1)`` integer array in C order."""
        if self.is_empty:
            return np.zeros((0, self.m + 1), dtype=np.int64)
        axes = [np.arange(-t, t + 1) for t in self.tau_max] + [np.arange(self.j_max + 1)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1).astype(np.int64)

    def flat_index(self, modes: np.ndarray) -> np.ndarray:
        modes = np.atleast_2d(modes)
        idx = [modes[:, k] + t for k, t in enumerate(self.tau_max)] + [modes[:, -1]]
        return np.ravel_multi_index(idx, self.shape)

    def to_dict(self):
        return {"tau_max": list(self.tau_max), "j_max": self.j_max}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["tau_max"]), data["j_max"])


def weight(params: SpaceParams, mode_: ModeIndex) -> float:
    """Gelfand-Shilov weight ``||tau||_2^(1/sigma) + (j+1)^(1/(2 n mu))``."""
    tau = np.asarray(mode_.tau, dtype=float)
    return float(np.linalg.norm(tau) ** params.tau_exponent
                 + (mode_.j + 1) ** params.j_exponent)


def weights(params: SpaceParams, modes: np.ndarray) -> np.ndarray:
    """Vectorised :func:`weight` over an ``(N, m+1)`` mode array."""
    modes = np.atleast_2d(np.asarray(modes))
    tau = modes[:, :-1].astype(float)
    j = modes[:, -1].astype(float)
    return np.sqrt(np.einsum("ij,ij->i", tau, tau)) ** params.tau_exponent + (j + 1.0) ** params.j_exponent


def weight_range(params: SpaceParams, bounds: Bounds) -> tuple:
    """Smallest and largest weight on the grid (attained at the origin and a corner)."""
    lo = 1.0
    corner = np.array(list(bounds.tau_max) + [bounds.j_max])
    hi = float(weights(params, corner[None, :])[0])
    return lo, hi


def shell_edges(lo: float, hi: float, count: int) -> np.ndarray:
    if count < 1:
        raise ContractError("shell count must be >= 1", contract="shellCount >= 1")
    return np.linspace(lo, hi, count + 1)


def shell_of(w: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Shell index for each weight: half-open ranges, the last one closed."""
    return np.searchsorted(edges[1:-1], w, side="right")


def enumerate_shells(bounds: Bounds, shell_count: int, params: SpaceParams | None = None) -> list:
    """Partition the grid into ``shell_count`` equal-width weight ranges.

    Returns a list of mode lists (possibly empty), ordered from the
    innermost range outwards; their union is the full grid.
    """
    if shell_count < 1:
        raise ContractError("shell count must be >= 1", contract="shellCount >= 1")
    if bounds.is_empty:
        return []
    params = params or SpaceParams(m=bounds.m)
    modes = bounds.all_modes()
    w = weights(params, modes)
    edges = shell_edges(float(w.min()), float(w.max()), shell_count)
    which = shell_of(w, edges)
    shells = [[] for _ in range(shell_count)]
    for row, s in zip(modes, which):
        shells[s].append(ModeIndex(tuple(int(t) for t in row[:-1]), int(row[-1])))
    return shells


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Sparse coefficient field over a rectangular mode grid.

    Only nonzero coefficients are stored (``modes`` rows sorted in C order
    of the grid); unstored in-bounds modes are zero.
    """

    bounds: Bounds
    modes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, self.bounds.m + 1)
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if len(modes) != len(values):
            raise ShapeError("modes and values differ in length")
        if len(modes) and not self.bounds.contains(modes).all():
            raise ShapeError("field has entries outside its bounds")
        keep = values != 0
        modes, values = modes[keep], values[keep]
        if len(modes):
            flat = self.bounds.flat_index(modes)
            order = np.argsort(flat, kind="stable")
            if np.any(np.diff(flat[order]) == 0):
                raise ShapeError("duplicate modes in field")
            modes, values = modes[order], values[order]
        modes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, bounds: Bounds) -> "SpectralField":
        return cls(bounds, np.zeros((0, bounds.m + 1), dtype=np.int64), np.zeros(0, complex))

    @classmethod
    def from_dict(cls, bounds: Bounds, entries: dict) -> "SpectralField":
        if not entries:
            return cls.zeros(bounds)
        rows, vals = [], []
        for key, v in entries.items():
            tau, j = key
            tau = (tau,) if np.isscalar(tau) else tuple(tau)
            rows.append(list(tau) + [j])
            vals.append(v)
        return cls(bounds, np.array(rows, dtype=np.int64), np.array(vals, dtype=complex))

    @classmethod
    def from_dense(cls, bounds: Bounds, dense: np.ndarray) -> "SpectralField":
        dense = np.asarray(dense, dtype=complex)
        if dense.shape != bounds.shape:
            raise ShapeError(f"dense array has shape {dense.shape}, expected {bounds.shape}")
        idx = np.nonzero(dense)
        modes = np.stack(idx, axis=1).astype(np.int64) if idx[0].size else np.zeros((0, bounds.m + 1), np.int64)
        if len(modes):
            modes[:, :-1] -= np.array(bounds.tau_max)
        return cls(bounds, modes, dense[idx])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.bounds.shape, dtype=complex)
        if len(self.modes):
            out.reshape(-1)[self.bounds.flat_index(self.modes)] = self.values
        return out

    @property
    def nnz(self) -> int:
        return len(self.values)

    def get(self, mode_) -> complex:
        mode_ = mode(*mode_) if not isinstance(mode_, ModeIndex) else mode_
        row = np.array(list(mode_.tau) + [mode_.j])
        hit = np.nonzero((self.modes == row).all(axis=1))[0]
        return complex(self.values[hit[0]]) if hit.size else 0j

    def items(self):
        for row, v in zip(self.modes, self.values):
            yield ModeIndex(tuple(int(t) for t in row[:-1]), int(row[-1])), complex(v)

    def _check_compatible(self, other):
        if not isinstance(other, SpectralField) or other.bounds != self.bounds:
            raise ShapeError("fields must share bounds")

    def __add__(self, other):
        self._check_compatible(other)
        return SpectralField.from_dense(self.bounds, self.to_dense() + other.to_dense())

    def __sub__(self, other):
        self._check_compatible(other)
        return SpectralField.from_dense(self.bounds, self.to_dense() - other.to_dense())

    def __mul__(self, scalar):
        return SpectralField(self.bounds, self.modes, self.values * complex(scalar))

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, SpectralField) and other.bounds == self.bounds
                and np.array_equal(other.modes, self.modes)
                and np.array_equal(other.values, self.values))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.nnz else 0.0


@dataclass(frozen=True)
class DecayProfile:
    """Points ``(weight, -log|a|)`` and a fitted lower envelope.

    The envelope is ``-log|a| >= slope * weight - intercept``, i.e.
    ``|a| <= exp(intercept) * exp(-slope * weight)``.
    """

    points: np.ndarray
    envelope_slope: float
    envelope_intercept: float


def reconstruct(field_: SpectralField, t_grid, x_grid, basis) -> np.ndarray:
    """Evaluate the truncated double series on ``t_grid`` x ``x_grid``.

    ``t_grid`` is an ``(Nt, m)`` array of torus points, ``x_grid`` an
    ``(Nx, n)`` array; the result has shape ``(Nt, Nx)``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim == 1:
        t_grid = t_grid[:, None]
    x_grid = np.asarray(x_grid, dtype=float)
    if x_grid.ndim == 1:
        x_grid = x_grid[:, None]
    if field_.nnz == 0:
        return np.zeros((len(t_grid), len(x_grid)), dtype=complex)
    js = np.unique(field_.modes[:, -1])
    phi = basis.eigenfunctions(js, x_grid)
    row = np.searchsorted(js, field_.modes[:, -1])
    phase = np.exp(1j * t_grid @ field_.modes[:, :-1].T.astype(float))
    return phase @ (field_.values[:, None] * phi[row])


def _header(m: int) -> list:
    return [f"tau_{k + 1}" for k in range(m)] + ["j", "re", "im"]


def save_field(field_: SpectralField, path, params: SpaceParams | None = None) -> None:
    """Write ``path`` (CSV, one row per nonzero entry) and ``path.json`` sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(field_.bounds.m))
        for row, v in zip(field_.modes, field_.values):
            writer.writerow([int(x) for x in row] + [repr(float(v.real)), repr(float(v.imag))])
    meta = {"bounds": field_.bounds.to_dict()}
    if params is not None:
        meta["params"] = params.to_dict()
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_field(path, bounds: Bounds | None = None):
    """Read a field written by :func:`save_field`.

    Returns ``(field, params)``; ``params`` is None when the sidecar has none.
    """
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    params = None
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        bounds = bounds or Bounds.from_dict(meta["bounds"])
        if "params" in meta:
            params = SpaceParams.from_dict(meta["params"])
    if bounds is None:
        raise ContractError(f"no bounds for {path}: missing sidecar {sidecar.name}", contract="field-sidecar")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _header(bounds.m):
            raise ShapeError(f"unexpected CSV header {header}")
        rows, vals = [], []
        for rec in reader:
            rows.append([int(x) for x in rec[:-2]])
            vals.append(complex(float(rec[-2]), float(rec[-1])))
    if not rows:
        return SpectralField.zeros(bounds), params
    return SpectralField(bounds, np.array(rows, dtype=np.int64), np.array(vals, dtype=complex)), params


def euclidean_mode_norm(modes: np.ndarray) -> np.ndarray:
    """Euclidean norm of the concatenated ``(tau, j)`` vector, ``j`` 0-based."""
    modes = np.atleast_2d(modes).astype(float)
    return np.sqrt(np.einsum("ij,ij->i", modes, modes))


__all__ = [
    "SpaceParams", "ModeIndex", "Bounds", "SpectralField", "DecayProfile", "mode",
    "weight", "weights", "weight_range", "enumerate_shells", "shell_edges", "shell_of",
    "reconstruct", "save_field", "load_field", "euclidean_mode_norm",
]

