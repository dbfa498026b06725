"""Eigenvalue providers for the spatial operator P and Hermite functions.

Theorems about the operator systems depend on P only through its
eigenvalues; eigenfunctions are available for the harmonic oscillator
family (tensorised Hermite functions), which is also what ``reconstruct``
needs.
"""

from __future__ import annotations

import csv
import json
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._numbers import is_exact, parse_real
from .exceptions import ContractError, FitDomainError, OutOfRangeError, UnsupportedBasisError

_PI_QUARTER = math.pi ** -0.25
_RESCALE = 1e150


def hermite_functions(j_max: int, x) -> np.ndarray:
    """All L2-normalised Hermite functions ``h_0 .. h_{j_max}`` at ``x``.

    Uses the three-term recurrence with a running log-scale, so values deep
    in the Gaussian tail underflow only at the very end (to exactly zero).
    Returns an array of shape ``(j_max + 1,) + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.reshape(-1)
    out = np.empty((j_max + 1, x.size))
    log_scale = -0.5 * x * x
    prev = np.zeros_like(x)
    cur = np.full_like(x, _PI_QUARTER)
    out[0] = cur * np.exp(log_scale)
    for k in range(j_max):
        nxt = x * math.sqrt(2.0 / (k + 1)) * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if big.any():
            cur[big] /= _RESCALE
            prev[big] /= _RESCALE
            log_scale[big] += math.log(_RESCALE)
        out[k + 1] = cur * np.exp(log_scale)
    return out.reshape((j_max + 1,) + shape)


def hermite_eval(j: int, x):
    """Value of the L2-normalised Hermite function ``h_j`` at ``x``."""
    if j < 0:
        raise OutOfRangeError(f"Hermite index must be >= 0, got {j}")
    vals = hermite_functions(int(j), x)[-1]
    return float(vals) if np.ndim(vals) == 0 else vals


class EigenProvider:
    """Base class: real eigenvalues ``lambda_j`` (0-based ``j``) of P.

    Subclasses set ``bigM`` (order of P) and ``n`` (dimension).
    """

    bigM: int
    n: int
    has_eigenfunctions = False

    def eigenvalue(self, j: int):
        """Exact eigenvalue when available (int or Fraction), else float."""
        raise NotImplementedError

    def eigenvalues(self, js) -> np.ndarray:
        js = np.asarray(js, dtype=np.int64)
        return np.array([float(self.eigenvalue(int(j))) for j in js.reshape(-1)]).reshape(js.shape)

    def exact_eigenvalue(self, j: int):
        lam = self.eigenvalue(j)
        return Fraction(lam) if is_exact(lam) else None

    @property
    def is_exact(self) -> bool:
        """All eigenvalues are exact rationals."""
        return False

    @property
    def is_integer_valued(self) -> bool:
        return False

    @property
    def length(self):
        """Number of available eigenvalues, None for infinite sequences."""
        return None

    def recurring_residues(self, modulus: int):
        """Residues of ``lambda_j mod modulus`` hit for infinitely many ``j``.

        None when the provider cannot decide (finite or inexact sequences).
        """
        return None

    def indices_with_value(self, value) -> list:
        """Every ``j`` with ``lambda_j == value`` exactly (a finite list)."""
        raise NotImplementedError

    def eigenfunctions(self, js, x) -> np.ndarray:
        raise UnsupportedBasisError(f"{self.describe()} has no eigenfunction evaluation")

    def describe(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        raise NotImplementedError


class Harmonic1D(EigenProvider):
    """``-d^2/dx^2 + x^2`` on the line: ``lambda_j = 2j + 1``."""

    bigM = 2
    n = 1
    has_eigenfunctions = True

    def eigenvalue(self, j):
        if j < 0:
            raise OutOfRangeError(f"eigen index must be >= 0, got {j}")
        return 2 * int(j) + 1

    def eigenvalues(self, js):
        return 2.0 * np.asarray(js, dtype=float) + 1.0

    @property
    def is_exact(self):
        return True

    @property
    def is_integer_valued(self):
        return True

    def recurring_residues(self, modulus):
        return {(2 * j + 1) % modulus for j in range(modulus)}

    def indices_with_value(self, value):
        value = Fraction(value)
        if value.denominator != 1 or value < 1 or value.numerator % 2 == 0:
            return []
        return [(value.numerator - 1) // 2]

    def eigenfunctions(self, js, x):
        js = np.asarray(js, dtype=np.int64)
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ContractError("Harmonic1D expects 1-D points", contract="n == 1")
            x = x[:, 0]
        if js.size == 0:
            return np.zeros((0,) + x.shape)
        table = hermite_functions(int(js.max()), x)
        return table[js]

    def describe(self):
        return "harmonic1d"

    def to_dict(self):
        return {"kind": "harmonic1d"}


def _binom(a: int, b: int) -> int:
    return math.comb(a, b) if a >= b >= 0 else 0


class HarmonicND(EigenProvider):
    """``-Laplace + |x|^2`` on R^n: eigenvalues ``2|alpha| + n``.

    Eigenvalues are listed with multiplicity; ties are broken by ascending
    lexicographic order of the multi-index ``alpha``.
    """

    bigM = 2
    has_eigenfunctions = True

    def __init__(self, n: int):
        if n < 1:
            raise ContractError(f"dimension must be >= 1, got {n}", contract="n >= 1")
        self.n = int(n)
        self._lock = threading.Lock()
        self._cum = np.array([1], dtype=np.int64)  # _cum[k] = #{|alpha| <= k}

    def _extend_to(self, j_max: int):
        with self._lock:
            while self._cum[-1] <= j_max:
                k = len(self._cum)
                extra = np.array([_binom(kk + self.n, self.n) for kk in range(k, 2 * k + 1)], dtype=np.int64)
                self._cum = np.concatenate([self._cum, extra])
            return self._cum

    def level(self, js) -> np.ndarray:
        """Total degree ``|alpha|`` of the multi-index carrying index ``j``."""
        js = np.asarray(js, dtype=np.int64)
        if js.size and js.min() < 0:
            raise OutOfRangeError("eigen index must be >= 0")
        cum = self._extend_to(int(js.max()) if js.size else 0)
        return np.searchsorted(cum, js, side="right")

    def eigenvalue(self, j):
        return 2 * int(self.level(int(j))) + self.n

    def eigenvalues(self, js):
        return 2.0 * self.level(js).astype(float) + self.n

    @property
    def is_exact(self):
        return True

    @property
    def is_integer_valued(self):
        return True

    def recurring_residues(self, modulus):
        return {(2 * k + self.n) % modulus for k in range(modulus)}

    def indices_with_value(self, value):
        value = Fraction(value)
        if value.denominator != 1:
            return []
        k2 = value.numerator - self.n
        if k2 < 0 or k2 % 2:
            return []
        k = k2 // 2
        return list(range(_binom(k - 1 + self.n, self.n), _binom(k + self.n, self.n)))

    def multi_index(self, j: int) -> tuple:
        k = int(self.level(int(j)))
        offset = int(j) - _binom(k - 1 + self.n, self.n)
        return _level_multi_indices(self.n, k)[offset]

    def eigenfunctions(self, js, x):
        js = np.asarray(js, dtype=np.int64)
        x = np.asarray(x, dtype=float).reshape(-1, self.n)
        if js.size == 0:
            return np.zeros((0, len(x)))
        alphas = np.array([self.multi_index(int(j)) for j in js])
        table = hermite_functions(int(alphas.max()), x)  # (deg, Nx, n)
        out = np.ones((len(js), len(x)))
        for axis in range(self.n):
            out *= table[alphas[:, axis], :, axis]
        return out

    def describe(self):
        return f"harmonicnd({self.n})"

    def to_dict(self):
        return {"kind": "harmonicnd", "n": self.n}


@lru_cache(maxsize=256)
def _level_multi_indices(n: int, k: int) -> tuple:
    """Multi-indices in N_0^n with ``|alpha| = k`` in ascending lexicographic order."""
    out = []
    for bars in combinations(range(k + n - 1), n - 1):
        parts, prev = [], -1
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(k + n - 1 - prev - 1)
        out.append(tuple(parts))
    return tuple(sorted(out))


class PowerOf(EigenProvider):
    """``base ** exponent``: eigenvalues raised to an integer power."""

    def __init__(self, base: EigenProvider, exponent: int):
        if int(exponent) != exponent or exponent < 1:
            raise ContractError(f"power must be a positive integer, got {exponent}", contract="exponent >= 1")
        self.base = base
        self.exponent = int(exponent)
        self.bigM = base.bigM * self.exponent
        self.n = base.n
        self.has_eigenfunctions = base.has_eigenfunctions

    def eigenvalue(self, j):
        return self.base.eigenvalue(j) ** self.exponent

    def eigenvalues(self, js):
        return self.base.eigenvalues(js) ** self.exponent

    @property
    def is_exact(self):
        return self.base.is_exact

    @property
    def is_integer_valued(self):
        return self.base.is_integer_valued

    @property
    def length(self):
        return self.base.length

    def recurring_residues(self, modulus):
        res = self.base.recurring_residues(modulus)
        if res is None:
            return None
        return {pow(r, self.exponent, modulus) for r in res}

    def indices_with_value(self, value):
        value = Fraction(value)
        out = []
        for sign in (1, -1) if self.exponent % 2 == 0 else (1,):
            root = _exact_root(value, self.exponent)
            if root is not None:
                out.extend(self.base.indices_with_value(sign * root))
        return sorted(set(out))

    def eigenfunctions(self, js, x):
        return self.base.eigenfunctions(js, x)

    def describe(self):
        return f"power({self.base.describe()},{self.exponent})"

    def to_dict(self):
        return {"kind": "power", "base": self.base.to_dict(), "exponent": self.exponent}


def _exact_root(value: Fraction, p: int):
    if value < 0:
        if p % 2 == 0:
            return None
        r = _exact_root(-value, p)
        return None if r is None else -r

    def iroot(n):
        r = round(n ** (1.0 / p)) if n < 2 ** 1000 else int(math.exp(math.log(n) / p))
        for cand in (r - 1, r, r + 1):
            if cand >= 0 and cand ** p == n:
                return cand
        # Newton fallback for huge values
        lo, hi = 0, 1 << (n.bit_length() // p + 1)
        while lo < hi:
            mid = (lo + hi) // 2
            if mid ** p < n:
                lo = mid + 1
            else:
                hi = mid
        return lo if lo ** p == n else None

    num, den = iroot(value.numerator), iroot(value.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


class Custom(EigenProvider):
    """User-supplied finite eigenvalue sequence with declared order and dimension."""

    def __init__(self, values, bigM: int, n: int):
        parsed = [parse_real(v) if isinstance(v, str) else v for v in values]
        if not parsed:
            raise ContractError("custom eigenvalue sequence is empty", contract="nonempty eigenvalues")
        for v in parsed:
            if isinstance(v, complex) or not math.isfinite(float(v)):
                raise ContractError(f"eigenvalues must be finite reals, got {v!r}", contract="real eigenvalues")
        mags = np.abs(np.array([float(v) for v in parsed]))
        if np.any(np.diff(mags) < 0):
            bad = int(np.nonzero(np.diff(mags) < 0)[0][0])
            raise ContractError(f"|lambda_j| must be nondecreasing; fails at j={bad + 1}",
                                contract="nondecreasing |lambda_j|")
        self._values = tuple(Fraction(v) if is_exact(v) else float(v) for v in parsed)
        self._floats = np.array([float(v) for v in self._values])
        self.bigM = int(bigM)
        self.n = int(n)

    def eigenvalue(self, j):
        if not 0 <= j < len(self._values):
            raise OutOfRangeError(f"custom provider has {len(self._values)} eigenvalues, asked for j={j}")
        v = self._values[j]
        if isinstance(v, Fraction) and v.denominator == 1:
            return v.numerator
        return v

    def eigenvalues(self, js):
        js = np.asarray(js, dtype=np.int64)
        if js.size and (js.min() < 0 or js.max() >= len(self._values)):
            raise OutOfRangeError(f"custom provider has {len(self._values)} eigenvalues")
        return self._floats[js]

    @property
    def is_exact(self):
        return all(isinstance(v, Fraction) for v in self._values)

    @property
    def is_integer_valued(self):
        return self.is_exact and all(v.denominator == 1 for v in self._values)

    @property
    def length(self):
        return len(self._values)

    def indices_with_value(self, value):
        return [j for j, v in enumerate(self._values) if v == value]

    def describe(self):
        return f"custom[{len(self._values)}]"

    def to_dict(self):
        return {"kind": "custom", "M": self.bigM, "n": self.n, "length": len(self._values)}


def load_custom(csv_path, meta_path=None) -> Custom:
    """Load ``j,lambda`` rows plus a JSON ``{"M": .., "n": ..}`` sidecar.

    The sidecar defaults to ``<csv_path>.json``.
    """
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_name(csv_path.name + ".json")
    meta = json.loads(meta_path.read_text())
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = sorted(((int(r["j"]), r["lambda"]) for r in reader), key=lambda t: t[0])
    if [j for j, _ in rows] != list(range(len(rows))):
        raise ContractError("custom eigenvalue CSV must list j = 0, 1, 2, ... without gaps",
                            contract="contiguous j")
    return Custom([v for _, v in rows], bigM=meta["M"], n=meta["n"])


def provider_from_dict(data, base_dir=None) -> EigenProvider:
    """Build a provider from a config mapping (see the README for keys)."""
    kind = str(data.get("kind", "harmonic1d")).lower()
    if kind in ("harmonic1d", "harmonic", "h"):
        return Harmonic1D()
    if kind == "harmonicnd":
        return HarmonicND(int(data["n"]))
    if kind == "power":
        return PowerOf(provider_from_dict(data.get("base", {"kind": "harmonic1d"}), base_dir),
                       int(data["exponent"]))
    if kind == "custom":
        if "values" in data:
            return Custom(data["values"], bigM=int(data["M"]), n=int(data["n"]))
        path = Path(data["csv"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return load_custom(path, data.get("meta"))
    raise ContractError(f"unknown eigen provider kind {kind!r}", contract="eigen provider")


@dataclass(frozen=True)
class WeylFit:
    rho_hat: float
    exponent_hat: float
    sample_range: tuple


def _fit_sample(provider: EigenProvider, j_range, max_points: int):
    lo, hi = int(j_range[0]), int(j_range[1])
    if hi - lo + 1 < 16:
        raise FitDomainError(f"need at least 16 indices, got {hi - lo + 1}")
    if provider.length is not None and hi >= provider.length:
        raise OutOfRangeError(f"range end {hi} exceeds provider length {provider.length}")
    if hi - lo + 1 <= max_points:
        js = np.arange(lo, hi + 1)
    else:
        js = np.unique(np.round(np.geomspace(lo + 1, hi + 1, max_points)).astype(np.int64) - 1)
    lam = provider.eigenvalues(js)
    if np.any(lam <= 0):
        raise FitDomainError("nonpositive eigenvalues in the fit range")
    return js, lam


def weyl_fit(provider: EigenProvider, j_range, max_points: int = 4096) -> WeylFit:
    """Least-squares fit of ``log lambda = log rho + e log(j+1)``.

    The 1-based index ``j+1`` is used as regressor. Long ranges are
    subsampled geometrically (``max_points`` indices) so every decade weighs
    the same.
    """
    js, lam = _fit_sample(provider, j_range, max_points)
    slope, intercept = np.polyfit(np.log(js + 1.0), np.log(lam), 1)
    return WeylFit(float(math.exp(intercept)), float(slope), (int(j_range[0]), int(j_range[1])))


class WeylLawRegressor(RegressorMixin, BaseEstimator):
    """Power-law regressor ``lambda ~ rho * (j+1)**exponent``.

    ``fit(j, lam)`` takes 0-based indices and eigenvalues; ``predict(j)``
    evaluates the fitted law.
    """

    def __init__(self, min_samples: int = 16):
        self.min_samples = min_samples

    def fit(self, X, y):
        j = np.asarray(X, dtype=float).reshape(-1)
        lam = np.asarray(y, dtype=float).reshape(-1)
        if j.shape != lam.shape:
            raise ValueError("X and y must have the same length")
        if len(j) < self.min_samples:
            raise FitDomainError(f"need at least {self.min_samples} samples, got {len(j)}")
        if np.any(lam <= 0):
            raise FitDomainError("nonpositive eigenvalues in the fit range")
        self.exponent_, log_rho = np.polyfit(np.log(j + 1.0), np.log(lam), 1)
        self.rho_ = float(math.exp(log_rho))
        return self

    def predict(self, X):
        check_is_fitted(self, "rho_")
        return self.rho_ * (np.asarray(X, dtype=float).reshape(-1) + 1.0) ** self.exponent_

    def score(self, X, y, sample_weight=None):
        # R^2 in log space, where the law is linear
        check_is_fitted(self, "rho_")
        from sklearn.metrics import r2_score
        return r2_score(np.log(np.asarray(y, dtype=float)), np.log(self.predict(X)),
                        sample_weight=sample_weight)
