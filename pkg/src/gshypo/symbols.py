"""Operator systems ``L_r = Q_r(D_t) + d_r P`` and their symbols.

The symbol of ``L_r`` at mode ``(tau, j)`` is ``Q_r(tau) + d_r * lambda_j``.
Exact rational data (``fractions.Fraction`` / :class:`ExactComplex`) is
kept exact end to end, so zeros of the symbol can be decided without
floating-point guesswork.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from ._numbers import ExactComplex, format_complex, parse_complex
from .eigen import EigenProvider
from .exceptions import ContractError, OutOfRangeError, ShapeError
from .spectral_core import Bounds, ModeIndex, SpaceParams, mode as make_mode

FLOAT_ZERO = 1e-30
# float symbol values this small relative to their terms are recomputed exactly
_CANCELLATION = 1e-6


class TimeSymbol:
    """Symbol ``a(tau)`` of a periodic (pseudo-)differential operator in ``t``."""

    m: int

    def evaluate(self, tau: np.ndarray) -> np.ndarray:
        """Complex values at an ``(N, m)`` integer array."""
        raise NotImplementedError

    def magnitude_scale(self, tau: np.ndarray) -> np.ndarray:
        """Size of the individual terms, used to detect cancellation."""
        return np.abs(self.evaluate(tau))

    def exact(self, tau: tuple):
        """Exact value (:class:`ExactComplex`) or None."""
        return None

    @property
    def is_affine(self) -> bool:
        return False

    @property
    def is_exact(self) -> bool:
        return False


class PolynomialSymbol(TimeSymbol):
    """``sum_alpha c_alpha tau^alpha`` for a constant-coefficient ``Q(D_t)``.

    ``coeffs`` maps multi-indices (tuples of length ``m``) to coefficients;
    coefficients may be exact (Fraction / :class:`ExactComplex`) or complex.
    """

    def __init__(self, coeffs: dict, m: int):
        self.m = int(m)
        parsed = {}
        for alpha, c in coeffs.items():
            alpha = (alpha,) if np.isscalar(alpha) else tuple(int(a) for a in alpha)
            if len(alpha) != self.m or min(alpha) < 0:
                raise ShapeError(f"multi-index {alpha} does not fit m={self.m}")
            c = parse_complex(c)
            if isinstance(c, ExactComplex) and not c:
                continue
            if not isinstance(c, ExactComplex) and c == 0:
                continue
            parsed[alpha] = parsed.get(alpha, 0) + c if alpha in parsed else c
        self.coeffs = dict(sorted(parsed.items()))
        self._alphas = np.array(list(self.coeffs) or [(0,) * self.m], dtype=np.int64).reshape(-1, self.m)
        self._cvals = np.array([complex(c) for c in self.coeffs.values()] or [0j])

    @classmethod
    def time_derivative(cls, k: int, m: int, scale=1) -> "PolynomialSymbol":
        """``scale * D_{t_k}`` (1-based ``k``)."""
        if not 1 <= k <= m:
            raise ShapeError(f"derivative index {k} outside 1..{m}")
        alpha = tuple(1 if i == k - 1 else 0 for i in range(m))
        return cls({alpha: scale}, m)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.coeffs), default=0)

    @property
    def is_affine(self):
        return self.degree <= 1

    @property
    def is_exact(self):
        return all(isinstance(c, ExactComplex) for c in self.coeffs.values())

    def affine_parts(self):
        """``(linear coefficients per axis, constant)`` of an affine symbol."""
        if not self.is_affine:
            raise ContractError("symbol is not affine", contract="affine time symbol")
        zero = ExactComplex(Fraction(0)) if self.is_exact else 0j
        lin = [zero] * self.m
        const = zero
        for alpha, c in self.coeffs.items():
            if sum(alpha) == 0:
                const = c
            else:
                lin[alpha.index(1)] = c
        return lin, const

    def _monomials(self, tau):
        tau = np.asarray(tau, dtype=float).reshape(-1, self.m)
        return np.prod(tau[:, None, :] ** self._alphas[None, :, :], axis=2)

    def evaluate(self, tau):
        return self._monomials(tau) @ self._cvals

    def magnitude_scale(self, tau):
        return np.abs(self._monomials(tau)) @ np.abs(self._cvals)

    def exact(self, tau):
        if not self.is_exact:
            return None
        total = ExactComplex(Fraction(0))
        for alpha, c in self.coeffs.items():
            mono = 1
            for t, a in zip(tau, alpha):
                mono *= int(t) ** a
            total = total + c * mono
        return total

    def to_config(self):
        return {"poly": [dict(alpha=list(a), **format_complex(c)) for a, c in self.coeffs.items()]}

    def __repr__(self):
        return f"PolynomialSymbol({self.coeffs!r}, m={self.m})"


class TabulatedSymbol(TimeSymbol):
    """Opaque symbol ``a(tau)`` with declared growth ``|a(tau)| <= C * max(1, |tau|)**nu``.

    ``func`` receives an ``(N, m)`` integer array and returns ``N`` complex
    values. ``exact_func`` (optional) maps a tau tuple to an exact value
    (Fraction, int or :class:`ExactComplex`) or None. Growth is checked on
    every evaluated batch.
    """

    def __init__(self, func: Callable, m: int, growth_c: float, growth_nu: float,
                 exact_func: Callable | None = None, name: str = "tabulated"):
        self.func = func
        self.m = int(m)
        self.growth_c = float(growth_c)
        self.growth_nu = float(growth_nu)
        self.exact_func = exact_func
        self.name = name

    def evaluate(self, tau):
        tau = np.asarray(tau).reshape(-1, self.m)
        vals = np.asarray(self.func(tau), dtype=complex).reshape(-1)
        if vals.shape[0] != tau.shape[0]:
            raise ShapeError(f"{self.name}: returned {vals.shape[0]} values for {tau.shape[0]} points")
        norm = np.sqrt((tau.astype(float) ** 2).sum(axis=1))
        bound = self.growth_c * np.maximum(1.0, norm) ** self.growth_nu
        if np.any(np.abs(vals) > bound * (1 + 1e-12)):
            raise ContractError(f"{self.name}: values exceed the declared growth bound",
                                contract="moderate growth |a(tau)| <= C|tau|^nu")
        return vals

    def exact(self, tau):
        if self.exact_func is None:
            return None
        return ExactComplex.coerce(self.exact_func(tuple(int(t) for t in tau)))

    @property
    def is_exact(self):
        return self.exact_func is not None

    def __repr__(self):
        return f"TabulatedSymbol({self.name})"


@dataclass(frozen=True)
class OperatorSpec:
    """One operator ``L_r = Q_r(D_t) + d_r P``."""

    q: TimeSymbol
    d: object = ExactComplex(Fraction(0))

    def __post_init__(self):
        object.__setattr__(self, "d", parse_complex(self.d))

    @property
    def d_exact(self):
        return self.d if isinstance(self.d, ExactComplex) else None

    @property
    def is_exact(self):
        return self.q.is_exact and self.d_exact is not None


@dataclass(frozen=True)
class SystemSpec:
    """The system ``(L_1, ..., L_l)`` sharing one eigen provider and frame."""

    ops: tuple
    eigen: EigenProvider
    params: SpaceParams = field(default_factory=SpaceParams)

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise ContractError("a system needs at least one operator", contract="l >= 1")
        for op in ops:
            if op.q.m != self.params.m:
                raise ShapeError(f"time symbol has m={op.q.m}, frame has m={self.params.m}")
        object.__setattr__(self, "ops", ops)

    @property
    def ell(self) -> int:
        return len(self.ops)

    @property
    def is_exact(self) -> bool:
        return self.eigen.is_exact and all(op.is_exact for op in self.ops)

    def permuted(self, order: Sequence[int]) -> "SystemSpec":
        return SystemSpec(tuple(self.ops[i] for i in order), self.eigen, self.params)


def _check_r(spec: SystemSpec, r: int):
    if not 1 <= r <= spec.ell:
        raise OutOfRangeError(f"operator index {r} outside 1..{spec.ell}")


def symbol_exact(spec: SystemSpec, r: int, mode_: ModeIndex):
    """Exact symbol value of operator ``r`` (1-based) or None."""
    _check_r(spec, r)
    op = spec.ops[r - 1]
    if op.d_exact is None:
        return None
    q = op.q.exact(mode_.tau)
    if q is None:
        return None
    if not op.d_exact:
        return q
    lam = spec.eigen.exact_eigenvalue(mode_.j)
    if lam is None:
        return None
    return q + op.d_exact * lam


def symbol_eval(spec: SystemSpec, r: int, mode_) -> complex:
    """Symbol ``Q_r(tau) + d_r lambda_j`` of operator ``r`` (1-based)."""
    mode_ = mode_ if isinstance(mode_, ModeIndex) else make_mode(*mode_)
    exact = symbol_exact(spec, r, mode_)
    if exact is not None:
        return complex(exact)
    op = spec.ops[r - 1]
    tau = np.array([mode_.tau])
    lam = float(spec.eigen.eigenvalue(mode_.j))
    return complex(op.q.evaluate(tau)[0] + complex(op.d) * lam)


def symbol_values(spec: SystemSpec, modes: np.ndarray) -> np.ndarray:
    """All operator symbols on an ``(N, m+1)`` mode array, shape ``(l, N)``.

    Values are computed in double precision; entries whose terms cancel
    to below a relative 1e-6 are recomputed exactly when the data allows.
    """
    modes = np.atleast_2d(np.asarray(modes, dtype=np.int64))
    tau, js = modes[:, :-1], modes[:, -1]
    out = np.empty((spec.ell, len(modes)), dtype=complex)
    if len(modes) == 0:
        return out
    lam = spec.eigen.eigenvalues(js)
    for r, op in enumerate(spec.ops):
        q = op.q.evaluate(tau)
        dl = complex(op.d) * lam
        vals = q + dl
        if op.is_exact and spec.eigen.is_exact:
            scale = op.q.magnitude_scale(tau) + np.abs(dl)
            suspicious = np.nonzero(np.abs(vals) <= _CANCELLATION * scale)[0]
            for i in suspicious:
                ex = symbol_exact(spec, r + 1, ModeIndex(tuple(int(t) for t in tau[i]), int(js[i])))
                if ex is not None:
                    vals[i] = complex(ex)
        out[r] = vals
    return out


def norm_argmax(values: np.ndarray):
    """``max_r |sigma_r|`` and the smallest maximising index (0-based)."""
    mags = np.abs(values)
    arg = np.argmax(mags, axis=0)
    return mags[arg, np.arange(mags.shape[1])], arg


def system_norm_argmax(spec: SystemSpec, mode_) -> tuple:
    """``(||sigma_L(mode)||, r*)`` with ``r*`` the smallest 1-based maximiser.

    Exact values decide ties when all operators are exact.
    """
    mode_ = mode_ if isinstance(mode_, ModeIndex) else make_mode(*mode_)
    exact = [symbol_exact(spec, r, mode_) for r in range(1, spec.ell + 1)]
    if all(e is not None for e in exact):
        sq = [e.abs2() for e in exact]
        best = max(sq)
        r_star = sq.index(best) + 1
        return math.sqrt(float(best)) if best else 0.0, r_star
    vals = [abs(symbol_eval(spec, r, mode_)) for r in range(1, spec.ell + 1)]
    best = max(vals)
    return best, vals.index(best) + 1


@dataclass
class SmallSymbolSet:
    """Modes of a grid where ``||sigma_L|| < threshold``.

    ``log_norm`` is ``log ||sigma_L||`` computed from exact values when
    available (no underflow), ``-inf`` at zeros. ``exact`` marks modes whose
    every operator value was evaluated exactly; ``float_zero`` marks zeros
    that were only detected through the 1e-30 floating-point rule.
    """

    modes: np.ndarray
    log_norm: np.ndarray
    exact: np.ndarray
    float_zero: np.ndarray

    @property
    def is_zero(self) -> np.ndarray:
        return np.isneginf(self.log_norm)

    def __len__(self):
        return len(self.modes)


def _slabs_for(spec: SystemSpec):
    """Real slab constraints ``|a . tau + b(lambda)| < T`` implied by affine operators.

    Each slab is ``(a (m,), b0, b1)`` meaning ``|a . tau + b0 + b1*lambda| < T``.
    """
    slabs = []
    for op in spec.ops:
        if not (isinstance(op.q, PolynomialSymbol) and op.q.is_affine):
            continue
        lin, const = op.q.affine_parts()
        lin = [complex(c) for c in lin]
        const, d = complex(const), complex(op.d)
        slabs.append((np.array([c.real for c in lin]), const.real, d.real))
        slabs.append((np.array([c.imag for c in lin]), const.imag, d.imag))
    return slabs


def _interval(a, b, thr):
    """Integer range of x with ``|a x + b| < thr`` (slightly widened)."""
    lo, hi = sorted(((-thr - b) / a, (thr - b) / a))
    pad = 1e-9 * (1.0 + abs(lo) + abs(hi))
    return math.ceil(lo - pad), math.floor(hi + pad)


def _box(ranges):
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in ranges]
    if not axes:
        return np.zeros((1, 0), dtype=np.int64)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _candidates_for_j(slabs, lam, tau_max, thr):
    m = len(tau_max)
    ranges = [[-t, t] for t in tau_max]
    multi = []
    for a, b0, b1 in slabs:
        b = b0 + b1 * lam
        nz = np.nonzero(a)[0]
        if nz.size == 0:
            if abs(b) >= thr * (1 + 1e-9) + 1e-300:
                return None
        elif nz.size == 1:
            k = int(nz[0])
            lo, hi = _interval(a[k], b, thr)
            ranges[k] = [max(ranges[k][0], lo), min(ranges[k][1], hi)]
        else:
            multi.append((a, b))
    if any(lo > hi for lo, hi in ranges):
        return None
    if not multi:
        return _box(ranges)
    k = int(np.argmax(np.abs(multi[0][0])))
    others = [i for i in range(m) if i != k]
    pts = _box([ranges[i] for i in others])
    lo = np.full(len(pts), float(ranges[k][0]))
    hi = np.full(len(pts), float(ranges[k][1]))
    for a, b in multi:
        if a[k] == 0:
            continue
        rest = pts @ a[others] + b
        e1, e2 = (-thr - rest) / a[k], (thr - rest) / a[k]
        pad = 1e-9 * (1.0 + np.abs(e1) + np.abs(e2))
        lo = np.maximum(lo, np.ceil(np.minimum(e1, e2) - pad))
        hi = np.minimum(hi, np.floor(np.maximum(e1, e2) + pad))
    counts = np.maximum(hi - lo + 1, 0).astype(np.int64)
    if counts.sum() == 0:
        return None
    rep = np.repeat(np.arange(len(pts)), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    out = np.empty((len(rep), m), dtype=np.int64)
    out[:, others] = pts[rep]
    out[:, k] = lo[rep].astype(np.int64) + offs
    return out


def _finish(spec: SystemSpec, modes: np.ndarray, threshold: float) -> SmallSymbolSet:
    """Evaluate candidate modes accurately and keep those below the threshold."""
    if len(modes) == 0:
        empty = np.zeros(0)
        return SmallSymbolSet(np.zeros((0, spec.params.m + 1), dtype=np.int64), empty,
                              empty.astype(bool), empty.astype(bool))
    vals = symbol_values(spec, modes)
    mags = np.abs(vals).max(axis=0)
    keep = mags < threshold * (1 + 1e-9)
    modes, vals = modes[keep], vals[:, keep]
    log_norm = np.empty(len(modes))
    exact = np.zeros(len(modes), dtype=bool)
    float_zero = np.zeros(len(modes), dtype=bool)
    for i, row in enumerate(modes):
        md = ModeIndex(tuple(int(t) for t in row[:-1]), int(row[-1]))
        best, all_exact = -math.inf, True
        for r in range(spec.ell):
            ex = symbol_exact(spec, r + 1, md)
            if ex is not None:
                lv = ex.log_abs()
            else:
                all_exact = False
                mag = abs(vals[r, i])
                lv = math.log(mag) if mag >= FLOAT_ZERO else -math.inf
            best = max(best, lv)
        log_norm[i] = best
        exact[i] = all_exact
        float_zero[i] = (not all_exact) and best == -math.inf
    keep = log_norm < math.log(threshold)
    return SmallSymbolSet(modes[keep], log_norm[keep], exact[keep], float_zero[keep])


def small_symbol_modes(spec: SystemSpec, bounds: Bounds, threshold: float = 1.0,
                       j_chunks: Sequence[range] | None = None) -> SmallSymbolSet:
    """All grid modes with ``||sigma_L(tau, j)|| < threshold``.

    Affine operators are turned into slab constraints so that only a thin
    set of candidate frequencies is visited per ``j``; systems without any
    affine operator fall back to a chunked sweep of the full grid.
    ``j_chunks`` restricts the sweep to the given index ranges (used to
    parallelise); results are in ascending ``j``.
    """
    if bounds.m != spec.params.m:
        raise ShapeError(f"bounds have m={bounds.m}, system has m={spec.params.m}")
    if bounds.is_empty:
        return _finish(spec, np.zeros((0, bounds.m + 1), dtype=np.int64), threshold)
    chunks = j_chunks if j_chunks is not None else [range(0, bounds.j_max + 1)]
    slabs = _slabs_for(spec)
    found = []
    for chunk in chunks:
        js = np.arange(chunk.start, chunk.stop, dtype=np.int64)
        if js.size == 0:
            continue
        lam = spec.eigen.eigenvalues(js)
        if slabs:
            # slabs with no tau dependence act on j alone
            ok = np.ones(len(js), dtype=bool)
            for a, b0, b1 in slabs:
                if not np.any(a):
                    ok &= np.abs(b0 + b1 * lam) < threshold * (1 + 1e-9) + 1e-300
            for j, lj in zip(js[ok], lam[ok]):
                taus = _candidates_for_j(slabs, float(lj), bounds.tau_max, threshold)
                if taus is not None and len(taus):
                    found.append(np.column_stack([taus, np.full(len(taus), j, dtype=np.int64)]))
        else:
            taus = Bounds(bounds.tau_max, 0).all_modes()[:, :-1]
            for j in js:
                block = np.column_stack([taus, np.full(len(taus), j, dtype=np.int64)])
                vals = symbol_values(spec, block)
                mags = np.abs(vals).max(axis=0)
                sel = mags < threshold * (1 + 1e-9)
                if sel.any():
                    found.append(block[sel])
    modes = np.concatenate(found) if found else np.zeros((0, bounds.m + 1), dtype=np.int64)
    return _finish(spec, modes, threshold)


@dataclass(frozen=True)
class ZeroSet:
    modes: list
    float_zero_caveat: bool

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)


def zero_set(spec: SystemSpec, bounds: Bounds) -> ZeroSet:
    """Grid modes where every operator symbol vanishes.

    A value is zero when exact arithmetic says so, or (inexact data only)
    when its modulus is below 1e-30; the latter sets ``float_zero_caveat``.
    """
    small = small_symbol_modes(spec, bounds, threshold=0.5)
    z = small.is_zero
    modes = [ModeIndex(tuple(int(t) for t in row[:-1]), int(row[-1])) for row in small.modes[z]]
    return ZeroSet(modes, bool(small.float_zero[z].any()))


# ---------------------------------------------------------------- exact resonance


@dataclass(frozen=True)
class Resonance:
    """Outcome of :func:`resonance_exact`.

    ``kind`` is ``FiniteCertified``, ``InfiniteCertified`` or ``Undecided``; for
    ``FiniteCertified`` the ``count`` is the exact size of the zero set over all
    of Z^m x N (an upper bound when ``partial`` is set).
    """

    kind: str
    count: int | None = None
    reason: str = ""
    partial: bool = False

    @property
    def finite(self):
        return self.kind == "FiniteCertified"

    @property
    def infinite(self):
        return self.kind == "InfiniteCertified"

    def to_dict(self):
        return {"kind": self.kind, "count": self.count, "reason": self.reason, "partial": self.partial}


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def _column_hermite(A: list) -> tuple:
    """Column-style Hermite reduction ``A U = H`` with ``U`` unimodular.

    ``A`` is a list of integer rows. Returns ``(H, U, pivots)`` where
    ``pivots[i]`` is the pivot column of row ``i`` or None.
    """
    rows = len(A)
    cols = len(A[0]) if rows else 0
    H = [list(r) for r in A]
    U = [[int(i == j) for j in range(cols)] for i in range(cols)]

    def colop(c1, c2, a, b, c, d):
        # (col c1, col c2) <- (a*c1 + b*c2, c*c1 + d*c2)
        for M in (H, U):
            for row in M:
                x, y = row[c1], row[c2]
                row[c1], row[c2] = a * x + b * y, c * x + d * y

    pivots = []
    p = 0
    for i in range(rows):
        if p >= cols:
            pivots.append(None)
            continue
        for c in range(p + 1, cols):
            x, y = H[i][p], H[i][c]
            if y == 0:
                continue
            g, s, t = _ext_gcd(x, y)
            colop(p, c, s, t, -y // g, x // g)
        if H[i][p] == 0:
            pivots.append(None)
            continue
        if H[i][p] < 0:
            for M in (H, U):
                for row in M:
                    row[p] = -row[p]
        pivots.append(p)
        p += 1
    return H, U, pivots


def _ext_gcd(a, b):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    x0, x1, y0, y1 = 1, 0, 0, 1
    aa, bb = a, b
    while bb:
        q, r = divmod(aa, bb)
        aa, bb = bb, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if aa < 0:
        aa, x0, y0 = -aa, -x0, -y0
    return aa, x0, y0


def _affine_rows(ops):
    """Real equations ``A tau + b Lambda + e = 0`` (integer-scaled) for exact affine ops."""
    rows = []
    for op in ops:
        lin, const = op.q.affine_parts()
        d = op.d_exact
        for part in ("re", "im"):
            coeffs = [getattr(c, part) for c in lin] + [getattr(d, part), getattr(const, part)]
            den = reduce(_lcm, (c.denominator for c in coeffs), 1)
            ints = [int(c * den) for c in coeffs]
            if any(ints):
                rows.append(ints)
    return rows


def _solve_structure(rows, m):
    """Reduce the integer system to affine-in-Lambda conditions.

    Returns ``(consistency, integrality, U, pivots_cols, rank)`` where each
    condition is a pair ``(alpha, beta)`` of Fractions for ``alpha + beta*Lambda``;
    consistency conditions must vanish, integrality conditions must be integers.
    ``z`` holds the pivot variables as affine pairs.
    """
    A = [r[:m] for r in rows]
    if m == 0 or not A:
        H, U, pivots = [list(r) for r in A], [[int(i == j) for j in range(m)] for i in range(m)], [None] * len(A)
    else:
        H, U, pivots = _column_hermite(A)
    z = {}
    consistency, integrality = [], []
    for i, row in enumerate(rows):
        y = (Fraction(-row[m + 1]), Fraction(-row[m]))  # -e - b*Lambda
        acc_a, acc_b = y
        p = pivots[i] if m and A else None
        for c, (za, zb) in z.items():
            h = H[i][c]
            acc_a -= h * za
            acc_b -= h * zb
        if p is None:
            consistency.append((acc_a, acc_b))
        else:
            z[p] = (acc_a / H[i][p], acc_b / H[i][p])
            integrality.append(z[p])
    rank = len(z)
    return consistency, integrality, U, z, rank


def _is_int(x: Fraction) -> bool:
    return x.denominator == 1


def _decide(ops, eigen: EigenProvider, m: int) -> Resonance:
    rows = _affine_rows(ops)
    consistency, integrality, U, z, rank = _solve_structure(rows, m)
    kernel = rank < m
    fixed = None
    for a, b in consistency:
        if b == 0:
            if a != 0:
                return Resonance("FiniteCertified", 0, "inconsistent linear conditions")
        else:
            val = -a / b
            if fixed is not None and val != fixed:
                return Resonance("FiniteCertified", 0, "conflicting eigenvalue constraints")
            fixed = val

    def feasible(lam: Fraction) -> bool:
        return all(_is_int(a + b * lam) for a, b in integrality) and all(
            a + b * lam == 0 for a, b in consistency)

    if fixed is not None:
        js = eigen.indices_with_value(fixed)
        good = [j for j in js if feasible(Fraction(eigen.exact_eigenvalue(j)))]
        if good and kernel:
            return Resonance("InfiniteCertified", None, f"lambda = {fixed} with a free frequency direction")
        return Resonance("FiniteCertified", len(good), f"eigenvalue pinned to {fixed}")
    if eigen.length is not None:
        good = [j for j in range(eigen.length) if feasible(eigen.exact_eigenvalue(j))]
        if good and kernel:
            return Resonance("InfiniteCertified", None, "free frequency direction")
        return Resonance("FiniteCertified", len(good), "finite custom spectrum")
    if not eigen.is_integer_valued:
        return Resonance("Undecided", None, "non-integer spectrum")
    modulus = reduce(_lcm, (b.denominator for _, b in integrality), 1)
    # alpha + beta*Lambda integral only depends on Lambda mod modulus
    residues = eigen.recurring_residues(modulus)
    if residues is None:
        return Resonance("Undecided", None, "spectrum residues unknown")
    hit = sorted(r for r in residues if feasible(Fraction(r)))
    if hit:
        return Resonance("InfiniteCertified", None, f"eigenvalue residues {hit[:5]} mod {modulus} solve the system")
    return Resonance("FiniteCertified", 0, f"no eigenvalue residue mod {modulus} is compatible")


def resonance_exact(spec: SystemSpec) -> Resonance:
    """Decide exactly whether the zero set of the symbol is infinite.

    Works on the operators with exact affine data and an exact spectrum.
    If every operator qualifies, the answer is exact. If only some do,
    their common zero set still contains the system's, so a finite answer
    stays certified (``partial`` marks the count as an upper bound).
    """
    if not spec.eigen.is_exact:
        return Resonance("Undecided", None, "inexact spectrum")
    usable = [op for op in spec.ops
              if isinstance(op.q, PolynomialSymbol) and op.q.is_affine and op.is_exact]
    if not usable:
        return Resonance("Undecided", None, "no operator with exact affine data")
    res = _decide(usable, spec.eigen, spec.params.m)
    if len(usable) == len(spec.ops):
        return res
    if res.finite:
        return Resonance("FiniteCertified", res.count, res.reason + " (exact subsystem)", partial=res.count != 0)
    return Resonance("Undecided", None, "only a subsystem is exact and it resonates")


# ------------------------------------------------------------ certified lower bounds


@dataclass(frozen=True)
class LowerBound:
    """Certified ``||sigma_L|| >= value`` off the zero set, over all modes."""

    value: Fraction
    reason: str
    zero_free: bool

    def to_dict(self):
        return {"value": float(self.value), "exact_value": str(self.value),
                "reason": self.reason, "zero_free": self.zero_free}


def _min_abs_affine_over_spectrum(a: Fraction, b: Fraction, eigen: EigenProvider):
    """``min_j |a + b lambda_j|`` for a nondecreasing spectrum, or None."""
    if b == 0:
        return abs(a)
    if eigen.length is not None:
        return min(abs(a + b * Fraction(eigen.exact_eigenvalue(j))) for j in range(eigen.length))
    root = -a / b
    lam0 = Fraction(eigen.exact_eigenvalue(0))
    if lam0 < 0:
        return None
    if root <= lam0:
        return abs(a + b * lam0)
    hi = 1
    while Fraction(eigen.exact_eigenvalue(hi)) < root:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if Fraction(eigen.exact_eigenvalue(mid)) < root:
            lo = mid
        else:
            hi = mid
    return min(abs(a + b * Fraction(eigen.exact_eigenvalue(j))) for j in (lo, hi))


def _lin_parts(lin, const, d):
    return [getattr(c, part) for c in list(lin) + [const, d] for part in ("re", "im")]


def certified_lower_bound(spec: SystemSpec):
    """Best exact global lower bound on ``||sigma_L||`` off its zeros, or None.

    Two certificates are tried:

    * lattice: all data rational with an integer spectrum, so every nonzero
      symbol value has real and imaginary parts in ``(1/D) Z``;
    * gap: an affine operator whose frequency coefficients are all real
      (or all imaginary) is bounded below by its imaginary (real) part,
      which depends on ``lambda_j`` only.
    """
    best = None
    if spec.eigen.is_exact and all(op.is_exact and isinstance(op.q, PolynomialSymbol) for op in spec.ops):
        dens = [1]
        for op in spec.ops:
            for c in list(op.q.coeffs.values()) + [op.d_exact]:
                dens += [c.re.denominator, c.im.denominator]
        if spec.eigen.is_integer_valued:
            best = LowerBound(Fraction(1, reduce(_lcm, dens)), "lattice: values in (1/D)Z[i]", False)
    for r, op in enumerate(spec.ops, start=1):
        if not (isinstance(op.q, PolynomialSymbol) and op.q.is_affine and op.is_exact and spec.eigen.is_exact):
            continue
        lin, const = op.q.affine_parts()
        d = op.d_exact
        for part in ("re", "im"):
            # with no frequency dependence in this part, |sigma| >= |part of sigma|
            if all(getattr(c, part) == 0 for c in lin):
                g = _min_abs_affine_over_spectrum(getattr(const, part), getattr(d, part), spec.eigen)
                if g is not None and g > 0 and (best is None or g > best.value):
                    best = LowerBound(g, f"gap: |{part} sigma_L{r}| >= {g} for every mode", True)
        if spec.eigen.is_integer_valued:
            own = _decide([op], spec.eigen, spec.params.m)
            if own.finite and own.count == 0:
                dens = [c.denominator for c in _lin_parts(lin, const, d)]
                g = Fraction(1, reduce(_lcm, dens, 1))
                if best is None or g > best.value or (g == best.value and not best.zero_free):
                    best = LowerBound(g, f"lattice: sigma_L{r} never vanishes and lies in (1/D)Z[i]", True)
    return best


def spec_to_config(spec: SystemSpec) -> dict:
    ops = []
    for op in spec.ops:
        if not isinstance(op.q, PolynomialSymbol):
            raise ContractError("only polynomial time symbols can be serialised", contract="serialisable spec")
        ops.append(dict(op.q.to_config(), d=format_complex(op.d)))
    return {"space": spec.params.to_dict(), "eigen": spec.eigen.to_dict(), "operator": ops}
