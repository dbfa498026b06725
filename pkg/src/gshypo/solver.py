"""Forward application, admissibility, symbol-division solves and counterexample data.

On the mode ``(tau, j)`` every operator acts by multiplication with its
symbol, ``f_r = sigma_r * u``. A data vector ``F`` is in the range only if
``sigma_r f_s = sigma_s f_r`` for all pairs and ``f_r`` vanishes wherever
``sigma_r`` does; the solve then divides by the largest symbol.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_field, check_system
from .exceptions import AdmissibilityError, ContractError, InvalidWitnessError, ShapeError
from .spectral_core import (Bounds, ModeIndex, SpaceParams, SpectralField, euclidean_mode_norm,
                            load_field, save_field)
from .symbols import (FLOAT_ZERO, SystemSpec, norm_argmax, symbol_exact, symbol_values)

ADMISSIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class DataVector:
    """The right-hand side ``F = (f_1, ..., f_l)``; all components share bounds."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ShapeError("a data vector needs at least one component")
        for c in comps:
            check_field(c, "component")
            if c.bounds != comps[0].bounds:
                raise ShapeError("data vector components must share bounds")
        object.__setattr__(self, "components", comps)

    @property
    def bounds(self) -> Bounds:
        return self.components[0].bounds

    @property
    def ell(self) -> int:
        return len(self.components)

    def __getitem__(self, r):
        return self.components[r]

    def __len__(self):
        return self.ell

    def support(self) -> np.ndarray:
        """Union of the component supports, in grid order."""
        rows = [c.modes for c in self.components if c.nnz]
        if not rows:
            return np.zeros((0, self.bounds.m + 1), dtype=np.int64)
        allm = np.concatenate(rows)
        flat = self.bounds.flat_index(allm)
        _, first = np.unique(flat, return_index=True)
        return allm[first]

    def values_on(self, modes: np.ndarray) -> np.ndarray:
        """Component values on ``modes``, shape ``(l, N)``."""
        out = np.zeros((self.ell, len(modes)), dtype=complex)
        if not len(modes):
            return out
        flat = self.bounds.flat_index(modes)
        for r, comp in enumerate(self.components):
            if comp.nnz:
                cf = self.bounds.flat_index(comp.modes)
                pos = np.searchsorted(cf, flat)
                pos = np.minimum(pos, len(cf) - 1)
                hit = cf[pos] == flat
                out[r, hit] = comp.values[pos[hit]]
        return out

    def __eq__(self, other):
        return isinstance(other, DataVector) and self.ell == other.ell and all(
            a == b for a, b in zip(self.components, other.components))


def save_data_vector(F: DataVector, directory, stem: str = "f", params: SpaceParams | None = None) -> Path:
    """One field CSV per component plus ``<stem>_manifest.json``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for r, comp in enumerate(F.components, start=1):
        name = f"{stem}_{r}.csv"
        save_field(comp, directory / name, params)
        names.append(name)
    manifest = directory / f"{stem}_manifest.json"
    meta = {"components": names, "bounds": F.bounds.to_dict()}
    if params is not None:
        meta["params"] = params.to_dict()
    manifest.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return manifest


def load_data_vector(manifest) -> DataVector:
    manifest = Path(manifest)
    try:
        meta = json.loads(manifest.read_text())
        names = meta["components"]
    except (OSError, ValueError, KeyError) as exc:
        raise ContractError(f"cannot read data vector manifest {manifest}: {exc}",
                            contract="data-vector manifest") from exc
    bounds = Bounds.from_dict(meta["bounds"]) if "bounds" in meta else None
    return DataVector(tuple(load_field(manifest.parent / n, bounds)[0] for n in names))


def _check_shapes(spec: SystemSpec, F: DataVector):
    if F.ell != spec.ell:
        raise ShapeError(f"data vector has {F.ell} components, system has {spec.ell} operators")
    if F.bounds.m != spec.params.m:
        raise ShapeError(f"data bounds have m={F.bounds.m}, system has m={spec.params.m}")


def operator_zero_mask(spec: SystemSpec, modes: np.ndarray, vals: np.ndarray):
    """Which ``sigma_r`` vanish, under the exact-zero rule.

    Returns ``(mask (l, N), float_caveat)``. Exact data decides exactly;
    otherwise a value counts as zero below 1e-30 and the caveat is raised.
    """
    mask = np.zeros(vals.shape, dtype=bool)
    caveat = False
    for r, i in zip(*np.nonzero(np.abs(vals) < FLOAT_ZERO)):
        md = ModeIndex(tuple(int(t) for t in modes[i, :-1]), int(modes[i, -1]))
        ex = symbol_exact(spec, r + 1, md)
        if ex is None:
            mask[r, i] = True
            caveat = True
        else:
            mask[r, i] = not ex
    return mask, caveat


def apply_system(spec: SystemSpec, u: SpectralField) -> DataVector:
    """``f_r = sigma_r * u`` mode by mode."""
    check_system(spec)
    check_field(u, "u")
    if u.bounds.m != spec.params.m:
        raise ShapeError(f"field has m={u.bounds.m}, system has m={spec.params.m}")
    vals = symbol_values(spec, u.modes)
    return DataVector(tuple(SpectralField(u.bounds, u.modes, vals[r] * u.values) for r in range(spec.ell)))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Compatibility of ``F`` with the system.

    ``commutation_residual`` is ``max |sigma_r f_s - sigma_s f_r|`` divided by
    the largest ``|sigma_r f_s| + |sigma_s f_r|`` on the support (0 for
    single-operator systems); ``kernel_violations`` lists ``(r, mode)``
    (1-based ``r``) with ``sigma_r = 0`` but ``f_r != 0``.
    """

    commutation_residual: float
    commutation_absolute: float
    kernel_violations: list
    tolerance: float
    float_zero_caveat: bool = False

    @property
    def admissible(self) -> bool:
        return self.commutation_residual <= self.tolerance and not self.kernel_violations

    def to_dict(self):
        return {"admissible": self.admissible,
                "commutationResidual": self.commutation_residual,
                "commutationAbsolute": self.commutation_absolute,
                "kernelViolations": [{"r": r, "tau": list(m.tau), "j": m.j}
                                     for r, m in self.kernel_violations],
                "tolerance": self.tolerance,
                "floatZeroCaveat": self.float_zero_caveat}


def admissibility_check(spec: SystemSpec, F: DataVector, tol: float = ADMISSIBILITY_TOL) -> AdmissibilityReport:
    check_system(spec)
    _check_shapes(spec, F)
    modes = F.support()
    vals = symbol_values(spec, modes)
    f = F.values_on(modes)
    absolute, scale = 0.0, 0.0
    for r in range(spec.ell):
        for s in range(r + 1, spec.ell):
            a, b = vals[r] * f[s], vals[s] * f[r]
            if len(modes):
                absolute = max(absolute, float(np.abs(a - b).max()))
                scale = max(scale, float((np.abs(a) + np.abs(b)).max()))
    residual = absolute / scale if scale > 0 else 0.0
    zero, caveat = operator_zero_mask(spec, modes, vals)
    violations = []
    for i in range(len(modes)):
        for r in range(spec.ell):
            if zero[r, i] and f[r, i] != 0:
                violations.append((r + 1, ModeIndex(tuple(int(t) for t in modes[i, :-1]), int(modes[i, -1]))))
    return AdmissibilityReport(residual, absolute, violations, tol, caveat)


@dataclass(frozen=True)
class SolveReport:
    admissibility: AdmissibilityReport
    reproduction_residual: float
    kernel_modes_zeroed: list = field(default_factory=list)

    def to_dict(self):
        return {"admissibility": self.admissibility.to_dict(),
                "reproductionResidual": self.reproduction_residual,
                "kernelModesZeroed": [{"tau": list(m.tau), "j": m.j} for m in self.kernel_modes_zeroed]}


def division_field(spec: SystemSpec, F: DataVector) -> SpectralField:
    """``f_{r*} / sigma_{r*}`` on every mode with a nonzero symbol, no admissibility check.

    This is the only candidate solution; for inadmissible data it is what
    a solution would have to be on each mode.
    """
    u, _ = _divide(spec, F)
    return u


def _divide(spec, F):
    modes = F.support()
    vals = symbol_values(spec, modes)
    f = F.values_on(modes)
    norm, arg = norm_argmax(vals)
    zero, _ = operator_zero_mask(spec, modes, vals)
    system_zero = zero.all(axis=0)
    cols = np.arange(len(modes))
    out = np.zeros(len(modes), dtype=complex)
    live = ~system_zero
    out[live] = f[arg[live], cols[live]] / vals[arg[live], cols[live]]
    if not np.all(np.isfinite(out)):
        raise ContractError("symbol underflows double precision on the support",
                            contract="representable symbol values")
    zeroed = [ModeIndex(tuple(int(t) for t in modes[i, :-1]), int(modes[i, -1]))
              for i in np.nonzero(system_zero)[0]]
    return SpectralField(F.bounds, modes, out), zeroed


def solve_with_report(spec: SystemSpec, F: DataVector, kernel: SpectralField | None = None,
                      tol: float = ADMISSIBILITY_TOL):
    """:func:`solve` plus a :class:`SolveReport`."""
    report = admissibility_check(spec, F, tol)
    if not report.admissible:
        raise AdmissibilityError("data vector is not admissible for the system", report)
    u, zeroed = _divide(spec, F)
    if kernel is not None:
        check_field(kernel, "kernel")
        if kernel.bounds != F.bounds:
            raise ShapeError("kernel field must share the data bounds")
        kvals = symbol_values(spec, kernel.modes)
        kzero, _ = operator_zero_mask(spec, kernel.modes, kvals)
        if kernel.nnz and not kzero.all(axis=0).all():
            raise ContractError("kernel field has entries off the zero set", contract="kernel supported on zero set")
        u = u + kernel
    back = apply_system(spec, u)
    worst = 0.0
    for r in range(spec.ell):
        diff = (back[r] - F[r]).max_abs()
        worst = max(worst, diff / max(F[r].max_abs(), 1e-300)) if F[r].nnz else max(worst, diff)
    return u, SolveReport(report, worst, zeroed)


def solve(spec: SystemSpec, F: DataVector, kernel: SpectralField | None = None,
          tol: float = ADMISSIBILITY_TOL) -> SpectralField:
    """Solve ``L u = F`` by dividing by the largest symbol.

    ``u = f_{r*} / sigma_{r*}`` with ``r*`` the smallest index attaining
    ``||sigma_L||``, and ``u = 0`` on the zero set (plus ``kernel``, which
    must be supported there). Raises :class:`AdmissibilityError` carrying the
    report when ``F`` is not admissible.
    """
    return solve_with_report(spec, F, kernel, tol)[0]


# ------------------------------------------------------------------ counterexamples


def _witness_rows(spec, witnesses):
    rows = []
    for w in witnesses:
        md = w[0] if isinstance(w, tuple) and isinstance(w[0], ModeIndex) else w
        if not isinstance(md, ModeIndex):
            md = ModeIndex(tuple(md[0]) if not np.isscalar(md[0]) else (int(md[0]),), int(md[1]))
        rows.append(list(md.tau) + [md.j])
    return np.array(rows, dtype=np.int64).reshape(-1, spec.params.m + 1)


def counterexample_pair(spec: SystemSpec, witnesses, flavor: str = "GH", bounds: Bounds | None = None):
    """Data built on small-divisor witnesses.

    ``witnesses`` are modes (or ``(mode, norm)`` pairs) with a small but
    nonzero ``||sigma_L||``.

    * ``"GH"``: ``f_r = sigma_r(mode_k) |mode_k|`` and ``u = |mode_k|`` at the
      witnesses, with ``|.|`` the Euclidean norm of the ``(tau, j)`` vector;
      then ``L u = F`` exactly while ``u`` grows and ``F`` decays.
    * ``"GS"``: ``f_r = 1`` at the witnesses, and no solution is returned.

    Returns ``(F, u)`` with ``u = None`` for ``"GS"``.
    """
    check_system(spec)
    flavor = flavor.upper()
    if flavor not in ("GH", "GS"):
        raise ContractError(f"unknown flavor {flavor!r}", contract="flavor in {GH, GS}")
    modes = _witness_rows(spec, witnesses)
    if bounds is None:
        if len(modes):
            bounds = Bounds(tuple(int(np.abs(modes[:, k]).max()) for k in range(spec.params.m)),
                            int(modes[:, -1].max()))
        else:
            bounds = Bounds.cube(0, 0, spec.params.m)
    if len(modes) and not bounds.contains(modes).all():
        raise ShapeError("witnesses lie outside the bounds")
    if len(modes):
        flat = bounds.flat_index(modes)
        _, first = np.unique(flat, return_index=True)
        modes = modes[np.sort(first)]
    vals = symbol_values(spec, modes)
    zero, _ = operator_zero_mask(spec, modes, vals)
    bad = np.nonzero(zero.all(axis=0))[0]
    if bad.size:
        md = modes[bad[0]]
        raise InvalidWitnessError(f"witness {tuple(md[:-1])}, j={md[-1]} has a zero symbol")
    if flavor == "GS":
        ones = np.ones(len(modes), dtype=complex)
        return DataVector(tuple(SpectralField(bounds, modes, ones) for _ in range(spec.ell))), None
    size = euclidean_mode_norm(modes)
    u = SpectralField(bounds, modes, size.astype(complex))
    F = DataVector(tuple(SpectralField(bounds, modes, vals[r] * size) for r in range(spec.ell)))
    return F, u


# ------------------------------------------------------------------ estimator wrapper


class SymbolDivisionSolver(TransformerMixin, BaseEstimator):
    """Estimator view of the solver.

    ``fit(F)`` checks admissibility and keeps the report; ``transform(F)``
    solves; ``inverse_transform(u)`` applies the system.
    """

    def __init__(self, spec=None, tol=ADMISSIBILITY_TOL):
        self.spec = spec
        self.tol = tol

    def fit(self, X, y=None):
        check_system(self.spec)
        self.report_ = admissibility_check(self.spec, X, self.tol)
        if not self.report_.admissible:
            raise AdmissibilityError("data vector is not admissible for the system", self.report_)
        return self

    def transform(self, X):
        return solve(self.spec, X, tol=self.tol)

    def inverse_transform(self, X):
        return apply_system(self.spec, X)


def relative_mode_error(u: SpectralField, v: SpectralField) -> float:
    """Largest per-mode ``|u - v| / |u|`` over the union of supports (``inf`` if ``u`` misses a mode of ``v``)."""
    a, b = u.to_dense().ravel(), v.to_dense().ravel()
    live = (a != 0) | (b != 0)
    if not live.any():
        return 0.0
    a, b = a[live], b[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(a != 0, np.abs(a - b) / np.abs(a), math.inf)
    return float(rel.max())
