"""Time-dependent systems ``L_r = D_{t_r} + a_r(t_r) P`` and their constant-coefficient normal form.

With ``a_{r,0}`` the mean of ``a_r`` and ``A(t) = sum_k int_0^{t_k} a_k - a_{k,0} t_k``,
the map ``Psi u = sum_j exp(-i A(t) lambda_j) u_j(t) phi_j`` conjugates the system to
``L_{r,0} = D_{t_r} + a_{r,0} P``. Everything here works slice by slice in ``j``
on a uniform time grid; FFTs move between coefficients and grid values.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._numbers import parse_real
from ._validation import check_field
from .eigen import EigenProvider
from .exceptions import ConfigError, ContractError, RegularityRestrictionError, ResolutionError, ShapeError
from .spectral_core import Bounds, SpaceParams, SpectralField
from .symbols import OperatorSpec, PolynomialSymbol, SystemSpec

TWO_PI = 2.0 * math.pi
PHASE_TAIL = 1e-13
RESONANCE_TOL = 1e-9


class TimeCoefficient:
    """A real 2*pi-periodic coefficient ``a(t)``."""

    @property
    def mean(self):
        raise NotImplementedError

    def __call__(self, t):
        raise NotImplementedError

    def drift_free_integral(self, t):
        """``int_0^t a - mean * t``; periodic in ``t``."""
        raise NotImplementedError

    def sup_deviation(self) -> float:
        """An upper bound for ``max |a - mean|``."""
        raise NotImplementedError

    quadrature_error = 0.0


class TrigCoefficient(TimeCoefficient):
    """``const + sum_n cos[n-1] cos(n t) + sin[n-1] sin(n t)``; exact coefficients stay exact."""

    def __init__(self, const=0, cos: Sequence = (), sin: Sequence = ()):
        self.const = parse_real(const)
        self.cos = [parse_real(c) for c in cos]
        self.sin = [parse_real(s) for s in sin]

    @property
    def mean(self):
        return self.const

    def _terms(self):
        n = max(len(self.cos), len(self.sin))
        c = np.array([float(x) for x in self.cos] + [0.0] * (n - len(self.cos)))
        s = np.array([float(x) for x in self.sin] + [0.0] * (n - len(self.sin)))
        return np.arange(1, n + 1, dtype=float), c, s

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k, c, s = self._terms()
        nt = np.multiply.outer(t, k)
        return float(self.const) + np.cos(nt) @ c + np.sin(nt) @ s

    def drift_free_integral(self, t):
        t = np.asarray(t, dtype=float)
        k, c, s = self._terms()
        nt = np.multiply.outer(t, k)
        return np.sin(nt) @ (c / k) + (1.0 - np.cos(nt)) @ (s / k)

    def sup_deviation(self):
        _, c, s = self._terms()
        return float(np.abs(c).sum() + np.abs(s).sum())

    def to_config(self):
        from ._numbers import format_real
        return {"const": format_real(self.const), "cos": [format_real(c) for c in self.cos],
                "sin": [format_real(s) for s in self.sin]}


class SampledCoefficient(TimeCoefficient):
    """Samples of ``a`` at ``t_i = 2 pi i / N``.

    The mean is the trapezoid rule on the periodic grid; the drift-free
    integral integrates the trigonometric interpolant of the samples (the
    trapezoid rule applied to each Fourier coefficient). ``quadrature_error``
    estimates the neglected part from the top quarter of the spectrum.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size < 4:
            raise ContractError("need at least 4 samples", contract="N_t >= 4")
        if not np.all(np.isfinite(values)):
            raise ContractError("coefficient samples must be finite real numbers", contract="real coefficient")
        self.values = values
        n = values.size
        self._hat = np.fft.rfft(values) / n
        top = self._hat[max(1, (3 * len(self._hat)) // 4):]
        self.quadrature_error = float(2 * np.abs(top).sum())

    @property
    def mean(self):
        return float(self._hat[0].real)

    def _coeffs(self):
        n = self.values.size
        k = np.arange(len(self._hat), dtype=float)
        c = self._hat.copy()
        if n % 2 == 0:
            c[-1] = c[-1] / 2  # Nyquist term split between +-n/2
        return k, c

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k, c = self._coeffs()
        e = np.exp(1j * np.multiply.outer(t, k))
        return c[0].real + 2 * (e[..., 1:] @ c[1:]).real

    def drift_free_integral(self, t):
        t = np.asarray(t, dtype=float)
        k, c = self._coeffs()
        e = np.exp(1j * np.multiply.outer(t, k[1:])) - 1.0
        return 2 * (e @ (c[1:] / (1j * k[1:]))).real

    def sup_deviation(self):
        return float(np.abs(self.values - self.mean).max())


def load_samples(path) -> SampledCoefficient:
    """Read a ``t,value`` CSV on a uniform grid starting at 0."""
    ts, vs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["t", "value"]:
            raise ConfigError(f"{path}: expected header t,value, got {header}")
        for row in reader:
            try:
                ts.append(float(row[0]))
                vs.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise ConfigError(f"{path}: bad row {row}") from exc
    n = len(ts)
    expected = TWO_PI * np.arange(n) / n
    if n < 4 or not np.allclose(ts, expected, atol=1e-9):
        raise ConfigError(f"{path}: samples must sit at t_i = 2 pi i / N")
    return SampledCoefficient(vs)


def coefficient_from_config(data, base_dir=None) -> TimeCoefficient:
    if isinstance(data, (int, float, str)) and not isinstance(data, bool):
        return TrigCoefficient(const=data)
    if not isinstance(data, dict):
        raise ConfigError(f"bad time coefficient {data!r}")
    if "samples" in data:
        p = Path(data["samples"])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return load_samples(p)
    if "values" in data:
        return SampledCoefficient(data["values"])
    return TrigCoefficient(data.get("const", 0), data.get("cos", ()), data.get("sin", ()))


@dataclass(frozen=True)
class TimeCoefficientSet:
    coeffs: tuple
    sigma: object = 1

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if not self.coeffs:
            raise ShapeError("need one coefficient per time variable")

    @property
    def m(self):
        return len(self.coeffs)


@dataclass(frozen=True)
class TimeDependentSystem:
    """``L_r = D_{t_r} + a_r(t_r) P`` for ``r = 1..m``."""

    coeffs: TimeCoefficientSet
    eigen: EigenProvider
    params: SpaceParams

    def __post_init__(self):
        if self.coeffs.m != self.params.m:
            raise ShapeError(f"{self.coeffs.m} coefficients for m={self.params.m}")


def average_coefficient(a: TimeCoefficient):
    """``(2 pi)^-1 int_0^{2 pi} a``; exact for trigonometric input with exact constant."""
    return a.mean


def phase_A(coeffs: TimeCoefficientSet, t) -> np.ndarray:
    """``A(t)`` at points ``t`` of shape ``(..., m)`` (or scalars when ``m = 1``)."""
    t = np.asarray(t, dtype=float)
    if coeffs.m == 1 and (t.ndim == 0 or t.shape[-1] != 1):
        return coeffs.coeffs[0].drift_free_integral(t)
    if t.shape[-1] != coeffs.m:
        raise ShapeError(f"points must have {coeffs.m} coordinates")
    return sum(a.drift_free_integral(t[..., k]) for k, a in enumerate(coeffs.coeffs))


def check_restriction(params: SpaceParams):
    """Refuse parameters with ``M mu - 1 > sigma``."""
    lhs = params.bigM * params.mu - 1
    if lhs > params.sigma:
        raise RegularityRestrictionError(
            f"M*mu - 1 = {float(lhs):g} exceeds sigma = {float(params.sigma):g}")


def reduce_system(La: TimeDependentSystem) -> SystemSpec:
    """Constant-coefficient normal form ``D_{t_r} + a_{r,0} P``."""
    check_restriction(La.params)
    m = La.params.m
    ops = tuple(OperatorSpec(PolynomialSymbol.time_derivative(r + 1, m), _as_coupling(a.mean))
                for r, a in enumerate(La.coeffs.coeffs))
    return SystemSpec(ops, La.eigen, La.params)


def _as_coupling(x):
    return x if isinstance(x, Fraction) else complex(float(x))


# ------------------------------------------------------------------ grids and Psi


def default_grid_size(La: TimeDependentSystem, bounds: Bounds) -> int:
    """``2 * max(2 T + 2, 8 lambda_max ||a - a_0||)``, rounded up to an even number."""
    lam = float(np.abs(La.eigen.eigenvalues(np.array([bounds.j_max]))).max())
    dev = max(a.sup_deviation() for a in La.coeffs.coeffs)
    need = max(2 * max(bounds.tau_max) + 2, math.ceil(8 * lam * dev))
    n = 2 * need
    return n + (n % 2)


def _grid_sizes(La, bounds, n_t):
    if n_t is None:
        n_t = default_grid_size(La, bounds)
    sizes = (n_t,) * bounds.m if np.isscalar(n_t) else tuple(int(x) for x in n_t)
    if len(sizes) != bounds.m:
        raise ShapeError(f"need {bounds.m} grid sizes")
    for k, (n, t) in enumerate(zip(sizes, bounds.tau_max)):
        if n < 2 * t + 2:
            raise ResolutionError(f"N_t = {n} on axis {k + 1} is below 2*tauMax + 2 = {2 * t + 2}")
    return sizes


def _phase_grid(La, sizes):
    axes = [TWO_PI * np.arange(n) / n for n in sizes]
    parts = [a.drift_free_integral(ax) for a, ax in zip(La.coeffs.coeffs, axes)]
    A = parts[0]
    for p in parts[1:]:
        A = np.add.outer(A, p)
    return A


def _embed(block, sizes, tau_max):
    """Place a ``(2T+1, ...)`` coefficient block into FFT layout."""
    grid = np.zeros(sizes, dtype=complex)
    idx = np.ix_(*[np.arange(-t, t + 1) % n for t, n in zip(tau_max, sizes)])
    grid[idx] = block
    return grid


def _extract(grid, tau_max):
    sizes = grid.shape
    idx = np.ix_(*[np.arange(-t, t + 1) % n for t, n in zip(tau_max, sizes)])
    return grid[idx]


def _outside_mass(coef, tau_max):
    """Largest coefficient magnitude with some ``|tau_k| > T_k``."""
    inside = np.zeros(coef.shape, dtype=bool)
    inside[np.ix_(*[np.arange(-t, t + 1) % n for t, n in zip(tau_max, coef.shape)])] = True
    out = np.abs(coef[~inside])
    return float(out.max()) if out.size else 0.0


def _to_grid(block, sizes, tau_max):
    n_total = int(np.prod(sizes))
    return np.fft.ifftn(_embed(block, sizes, tau_max)) * n_total


def _to_coef(values):
    return np.fft.fftn(values) / values.size


@dataclass(frozen=True)
class PsiResult:
    field: SpectralField
    n_t: tuple
    truncated: float
    interior_band: int

    def to_dict(self):
        return {"nT": list(self.n_t), "truncatedMax": self.truncated, "interiorBand": self.interior_band}


def phase_bandwidth(La: TimeDependentSystem, sizes, j_max: int, tol: float = PHASE_TAIL) -> int:
    """Smallest ``b`` with every Fourier coefficient of ``exp(-i A lambda_j)`` beyond ``|tau| > b``
    below ``tol`` (for all ``j <= j_max``); it bounds how far Psi spreads a mode."""
    A = _phase_grid(La, sizes)
    lam = np.abs(La.eigen.eigenvalues(np.arange(j_max + 1))).max() if j_max >= 0 else 0.0
    band = 0
    for sgn in (1.0, -1.0):
        coef = np.abs(_to_coef(np.exp(-1j * sgn * lam * A)))
        for axis, n in enumerate(sizes):
            prof = coef.max(axis=tuple(a for a in range(coef.ndim) if a != axis)) if coef.ndim > 1 else coef
            freqs = np.abs(np.fft.fftfreq(n, 1.0 / n))
            big = freqs[prof >= tol]
            band = max(band, int(big.max()) if big.size else 0)
    return band


def psi_apply(direction: str, u: SpectralField, La: TimeDependentSystem, n_t=None,
              threads: int = 1, report: bool = False):
    """Apply ``Psi`` (``"forward"``) or ``Psi^-1`` (``"inverse"``) to ``u``.

    Per ``j``: coefficients to the grid, multiply by ``exp(-+ i A lambda_j)``,
    back to coefficients, truncate to the input bounds. With ``report=True``
    returns a :class:`PsiResult` carrying the truncated magnitude and the
    band of edge modes that truncation can disturb.
    """
    check_field(u, "u")
    check_restriction(La.params)
    direction = direction.lower()
    if direction not in ("forward", "inverse"):
        raise ContractError(f"direction must be forward or inverse, got {direction!r}", contract="direction")
    if u.bounds.m != La.params.m:
        raise ShapeError(f"field has m={u.bounds.m}, system has m={La.params.m}")
    b = u.bounds
    sizes = _grid_sizes(La, b, n_t)
    A = _phase_grid(La, sizes)
    sign = -1.0 if direction == "forward" else 1.0
    dense = u.to_dense()
    js = np.unique(u.modes[:, -1]) if u.nnz else np.zeros(0, dtype=np.int64)
    lam = La.eigen.eigenvalues(js) if len(js) else np.zeros(0)

    def one(i):
        j = int(js[i])
        vals = _to_grid(dense[..., j], sizes, b.tau_max) * np.exp(1j * sign * lam[i] * A)
        coef = _to_coef(vals)
        return j, _extract(coef, b.tau_max), _outside_mass(coef, b.tau_max)

    if threads > 1 and len(js) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(len(js))))
    else:
        results = [one(i) for i in range(len(js))]
    out = np.zeros(b.shape, dtype=complex)
    truncated = 0.0
    for j, block, lost in results:
        out[..., j] = block
        truncated = max(truncated, lost)
    result = SpectralField.from_dense(b, out)
    if not report:
        return result
    band = phase_bandwidth(La, sizes, b.j_max) if b.j_max >= 0 else 0
    return PsiResult(result, tuple(sizes), truncated, band)


def interior_mask(bounds: Bounds, band: int) -> np.ndarray:
    """Dense boolean mask of modes with ``|tau_k| <= T_k - band`` on every axis."""
    mask = np.ones(bounds.shape, dtype=bool)
    for k, t in enumerate(bounds.tau_max):
        ax = np.abs(np.arange(-t, t + 1)) <= t - band
        shape = [1] * len(bounds.shape)
        shape[k] = 2 * t + 1
        mask &= ax.reshape(shape)
    return mask


@dataclass(frozen=True)
class ConjugationReport:
    residual: float
    per_operator: list
    n_t: tuple
    wraparound: float

    def to_dict(self):
        return {"residual": self.residual, "perOperator": self.per_operator,
                "nT": list(self.n_t), "wraparound": self.wraparound}


def conjugation_residual(La: TimeDependentSystem, test_field: SpectralField, n_t=None,
                         report: bool = False):
    """Relative size of ``Psi^-1 L_r Psi u - L_{r,0} u`` over the bounds, maximised over ``r``.

    ``Psi u`` is kept on the full grid (no truncation), ``D_{t_r}`` is
    applied spectrally and ``a_r(t_r)`` pointwise. ``wraparound`` is the
    largest coefficient of ``Psi u`` in the outer quarter of grid
    frequencies, relative to the largest overall: when it is not small the
    grid does not resolve the phase and the residual is meaningless.
    """
    check_field(test_field, "test field")
    check_restriction(La.params)
    b = test_field.bounds
    sizes = _grid_sizes(La, b, n_t)
    A = _phase_grid(La, sizes)
    axes = [TWO_PI * np.arange(n) / n for n in sizes]
    freqs = [np.fft.fftfreq(n, 1.0 / n) for n in sizes]
    for f, n in zip(freqs, sizes):
        if n % 2 == 0:
            f[n // 2] = 0.0
    means = [float(a.mean) for a in La.coeffs.coeffs]
    dense = test_field.to_dense()
    js = np.unique(test_field.modes[:, -1]) if test_field.nnz else np.zeros(0, dtype=np.int64)
    m = b.m
    num = [0.0] * m
    den = [0.0] * m
    wrap = 0.0
    for j in js:
        lam = float(La.eigen.eigenvalues(np.array([j]))[0])
        g = _to_grid(dense[..., j], sizes, b.tau_max)
        v = g * np.exp(-1j * lam * A)
        vhat = _to_coef(v)
        scale = float(np.abs(vhat).max()) or 1.0
        outer = np.zeros(sizes, dtype=bool)
        for k, n in enumerate(sizes):
            shape = [1] * m
            shape[k] = n
            outer |= (np.abs(np.fft.fftfreq(n, 1.0 / n)) > n // 4).reshape(shape)
        wrap = max(wrap, float(np.abs(vhat[outer]).max()) / scale if outer.any() else 0.0)
        for r in range(m):
            shape = [1] * m
            shape[r] = sizes[r]
            dv = np.fft.ifftn(vhat * freqs[r].reshape(shape)) * v.size
            coeff = np.asarray(La.coeffs.coeffs[r](axes[r]), dtype=float).reshape(shape)
            lv = dv + coeff * lam * v
            back = _extract(_to_coef(lv * np.exp(1j * lam * A)), b.tau_max)
            tau_r = np.arange(-b.tau_max[r], b.tau_max[r] + 1, dtype=float).reshape(
                [2 * t + 1 if k == r else 1 for k, t in enumerate(b.tau_max)])
            expected = (tau_r + means[r] * lam) * dense[..., j]
            num[r] = max(num[r], float(np.abs(back - expected).max()))
            den[r] = max(den[r], float(np.abs(expected).max()))
    per = [n / d if d > 0 else n for n, d in zip(num, den)]
    res = max(per) if per else 0.0
    if report:
        return ConjugationReport(res, per, tuple(sizes), wrap)
    return res


def compat_integral(La: TimeDependentSystem, r: int, j: int, f: SpectralField, n_t=None):
    """Max over the other time variables of ``|int_0^{2pi} exp(i lambda_j int_0^{t_r} a_r) f_{r,j} dt_r|``.

    Only defined when ``a_{r,0} lambda_j`` is within 1e-9 of an integer;
    otherwise returns None. The integral uses the trapezoid rule on the grid.
    """
    check_field(f, "f")
    check_restriction(La.params)
    m = La.params.m
    if not 1 <= r <= m:
        raise ContractError(f"r must be in 1..{m}", contract="operator index")
    a = La.coeffs.coeffs[r - 1]
    lam = float(La.eigen.eigenvalues(np.array([j]))[0])
    prod = float(a.mean) * lam
    if abs(prod - round(prod)) > RESONANCE_TOL:
        return None
    b = f.bounds
    if j > b.j_max:
        return 0.0
    sizes = _grid_sizes(La, b, n_t)
    vals = _to_grid(f.to_dense()[..., j], sizes, b.tau_max)
    t = TWO_PI * np.arange(sizes[r - 1]) / sizes[r - 1]
    shape = [1] * m
    shape[r - 1] = sizes[r - 1]
    phase = np.exp(1j * lam * (a.drift_free_integral(t) + float(a.mean) * t)).reshape(shape)
    integral = (vals * phase).mean(axis=r - 1) * TWO_PI
    return float(np.abs(integral).max())


@dataclass(frozen=True)
class NormalFormVerdict:
    verdict: object
    averages: list
    note: str = "verdict of the constant-coefficient normal form, which is equivalent"

    def to_dict(self):
        d = self.verdict.to_dict()
        d["via"] = "normal form"
        d["averages"] = [float(a) for a in self.averages]
        return d


def normal_form_verdict(La: TimeDependentSystem, bounds: Bounds, shell_count: int = 8, kind: str = "hypo",
                        **kw) -> NormalFormVerdict:
    """Report the normal form's verdict for the time-dependent system."""
    from .diagnostics import hypoellipticity_verdict, solvability_verdict

    spec = reduce_system(La)
    fn = hypoellipticity_verdict if kind == "hypo" else solvability_verdict
    return NormalFormVerdict(fn(spec, bounds, shell_count, **kw), [a.mean for a in La.coeffs.coeffs])


class PsiConjugation(TransformerMixin, BaseEstimator):
    """``transform`` applies ``Psi``, ``inverse_transform`` applies ``Psi^-1``."""

    def __init__(self, system=None, n_t=None, threads=1):
        self.system = system
        self.n_t = n_t
        self.threads = threads

    def fit(self, X, y=None):
        if not isinstance(self.system, TimeDependentSystem):
            raise ShapeError("system must be a TimeDependentSystem")
        check_field(X)
        check_restriction(self.system.params)
        self.n_t_ = _grid_sizes(self.system, X.bounds, self.n_t)
        return self

    def transform(self, X):
        return psi_apply("forward", X, self.system, self.n_t, self.threads)

    def inverse_transform(self, X):
        return psi_apply("inverse", X, self.system, self.n_t, self.threads)
