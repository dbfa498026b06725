"""Decay classification of coefficient fields and grid verdicts for operator systems.

Coefficient fields are classified by how ``-log|a|`` grows with the
weight ``w = ||tau||^(1/sigma) + (j+1)^(1/(2 n mu))``: linear growth with
positive slope means smooth (Gelfand-Shilov) data, at most sublinear
growth of ``log|a|`` means an ultradistribution.

The verdicts test the lower bound ``||sigma_L|| >= C_eps exp(-eps w)`` on a
finite grid. Only modes with ``||sigma_L|| < 1`` can make
``-log||sigma_L|| / w`` positive, so the profile visits just those (see
:func:`gshypo.symbols.small_symbol_modes`) and is still exact after the
clamp at zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_bounds, check_field, check_params, check_positive, check_system
from .exceptions import ContractError, DegenerateSystemError
from .spectral_core import (Bounds, DecayProfile, ModeIndex, SpaceParams, SpectralField,
                            shell_edges, shell_of, weight_range, weights)
from .symbols import (LowerBound, Resonance, SmallSymbolSet, SystemSpec, certified_lower_bound,
                      resonance_exact, small_symbol_modes)

DELTA0 = 1e-3
DELTA1 = 1e-2
MIN_ENTRIES = 32
MIN_SHELLS = 4
CLASSIFY_SHELLS = 16

SMOOTH = "Smooth"
ULTRA = "Ultradistribution"
NEITHER = "Neither"

HOLDS = "ConditionHolds"
FAILS = "ConditionFails"
INCONCLUSIVE = "Inconclusive"


# ------------------------------------------------------------------ classification


@dataclass(frozen=True)
class ClassificationVerdict:
    label: str
    profile: DecayProfile
    epsilon_hat: float | None
    growth_rate: float | None = None
    caveat: str = ""

    def to_dict(self):
        return {"label": self.label, "epsilonHat": _num(self.epsilon_hat),
                "growthRate": _num(self.growth_rate),
                "envelopeIntercept": _num(self.profile.envelope_intercept),
                "points": int(len(self.profile.points)), "caveat": self.caveat}


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _shell_extremes(w, y, count, pick):
    """Per nonempty shell, the point whose ``y`` is extreme (``pick`` = argmin/argmax)."""
    edges = shell_edges(float(w.min()), float(w.max()), count)
    which = shell_of(w, edges)
    idx = []
    for s in range(count):
        members = np.nonzero(which == s)[0]
        if members.size:
            idx.append(members[pick(y[members])])
    return np.array(idx, dtype=np.int64)


def _linear_rate(w, y):
    """Coefficient of ``w`` in a least-squares fit ``y ~ c0 + c1 w + c2 log w``.

    The ``log w`` column absorbs polynomial factors, so the rate reflects
    exponential behaviour only.
    """
    design = np.column_stack([np.ones_like(w), w, np.log(w)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[1])


def decay_classify(field_: SpectralField, params: SpaceParams | None = None,
                   delta0: float = DELTA0, delta1: float = DELTA1,
                   shell_count: int = CLASSIFY_SHELLS) -> ClassificationVerdict:
    """Label a coefficient field Smooth, Ultradistribution or Neither.

    With ``y = -log|a|`` over the nonzero entries and the weight range cut
    into ``shell_count`` equal shells:

    * Smooth when the exponential rate of the per-shell minima of ``y``
      (the largest coefficients) is at least ``delta0``; that rate is
      ``epsilon_hat`` and the intercept makes the envelope
      ``|a| <= exp(intercept - epsilon_hat * w)`` hold at every entry;
    * Ultradistribution when the exponential rate of the per-shell maxima
      of ``log|a|`` is at most ``delta1`` (growth slower than every
      exponential, up to that tolerance);
    * Neither otherwise, or when there are fewer than 32 entries or fewer
      than 4 occupied shells (with a caveat).
    """
    check_field(field_)
    params = check_params(params, field_.bounds.m)
    if field_.nnz == 0:
        prof = DecayProfile(np.zeros((0, 2)), math.inf, -math.inf)
        return ClassificationVerdict(SMOOTH, prof, math.inf, None, "zero field")
    w = weights(params, field_.modes)
    y = -np.log(np.abs(field_.values))
    order = np.lexsort((y, w))
    points = np.column_stack([w[order], y[order]])
    w, y = points[:, 0], points[:, 1]
    lows = _shell_extremes(w, y, shell_count, np.argmin)
    if len(w) < MIN_ENTRIES or len(lows) < MIN_SHELLS or w.max() == w.min():
        prof = DecayProfile(points, math.nan, math.nan)
        return ClassificationVerdict(NEITHER, prof, None, None,
                                     f"insufficient data: {len(w)} entries in {len(lows)} shells "
                                     f"(need {MIN_ENTRIES} in {MIN_SHELLS})")
    eps = _linear_rate(w[lows], y[lows])
    intercept = float(np.max(eps * w - y))
    prof = DecayProfile(points, eps, intercept)
    if eps >= delta0:
        return ClassificationVerdict(SMOOTH, prof, eps, None)
    highs = _shell_extremes(w, -y, shell_count, np.argmax)
    growth = _linear_rate(w[highs], -y[highs])
    if growth <= delta1:
        return ClassificationVerdict(ULTRA, prof, None, growth)
    return ClassificationVerdict(NEITHER, prof, None, growth)


class DecayClassifier(BaseEstimator):
    """Estimator wrapper around :func:`decay_classify`.

    ``fit(field)`` stores ``verdict_``, ``label_`` and ``epsilon_hat_``;
    ``predict`` labels one field or a list of fields.
    """

    def __init__(self, params=None, delta0=DELTA0, delta1=DELTA1, shell_count=CLASSIFY_SHELLS):
        self.params = params
        self.delta0 = delta0
        self.delta1 = delta1
        self.shell_count = shell_count

    def _classify(self, X):
        check_positive(self.shell_count, "shell_count", integer=True)
        return decay_classify(X, self.params, self.delta0, self.delta1, self.shell_count)

    def fit(self, X, y=None):
        self.verdict_ = self._classify(X)
        self.label_ = self.verdict_.label
        self.epsilon_hat_ = self.verdict_.epsilon_hat
        return self

    def predict(self, X):
        if isinstance(X, SpectralField):
            return self._classify(X).label
        return [self._classify(f).label for f in X]


# ------------------------------------------------------------------ Diophantine profile


@dataclass(frozen=True)
class DiophantineReport:
    """Per-shell small-divisor rates of a system on a grid.

    ``shell_eps`` holds ``(R, eps_hat(R))`` with ``R`` the outer weight of
    the shell; ``worst_modes`` holds ``(mode, ||sigma||, rate, log||sigma||)`` sorted by
    decreasing rate.
    """

    bounds: Bounds
    shell_eps: list
    trend: str
    worst_modes: list
    zero_modes: list
    float_zero_caveat: bool
    certificate: LowerBound | None
    delta0: float = DELTA0
    delta1: float = DELTA1
    caveats: list = field(default_factory=list)

    @property
    def eps_values(self):
        return [e for _, e in self.shell_eps]

    def to_dict(self):
        return {
            "grid": self.bounds.to_dict(),
            "shellEps": [[float(r), float(e)] for r, e in self.shell_eps],
            "trend": self.trend,
            "worstModes": [{"tau": list(m.tau), "j": m.j, "norm": n, "logNorm": ln, "rate": s}
                           for m, n, s, ln in self.worst_modes],
            "zeroCount": len(self.zero_modes),
            "lowerBound": self.certificate.to_dict() if self.certificate else None,
            "caveats": list(self.caveats),
        }


def _j_chunks(j_max: int, threads: int):
    count = max(1, threads) * 4
    step = max(1, math.ceil((j_max + 1) / count))
    return [range(s, min(j_max + 1, s + step)) for s in range(0, j_max + 1, step)]


def _merge(parts, m) -> SmallSymbolSet:
    if not parts:
        empty = np.zeros(0)
        return SmallSymbolSet(np.zeros((0, m + 1), dtype=np.int64), empty, empty.astype(bool), empty.astype(bool))
    return SmallSymbolSet(np.concatenate([p.modes for p in parts]),
                          np.concatenate([p.log_norm for p in parts]),
                          np.concatenate([p.exact for p in parts]),
                          np.concatenate([p.float_zero for p in parts]))


def small_modes_parallel(spec: SystemSpec, bounds: Bounds, threshold: float = 1.0,
                         threads: int = 1) -> SmallSymbolSet:
    """:func:`small_symbol_modes` with the ``j`` range split over threads.

    Chunks are merged in ascending ``j`` so the result does not depend on
    the thread count.
    """
    if threads <= 1 or bounds.is_empty:
        return small_symbol_modes(spec, bounds, threshold)
    chunks = _j_chunks(bounds.j_max, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: small_symbol_modes(spec, bounds, threshold, [c]), chunks))
    return _merge(parts, bounds.m)


def _trend(eps, delta0, delta1):
    outer = eps[len(eps) // 2:]
    if sum(e >= delta1 for e in outer) >= max(1, len(outer) // 2):
        return FAILS
    if all(b <= a for a, b in zip(outer, outer[1:])) and outer[-1] <= delta0:
        return HOLDS
    return INCONCLUSIVE


def diophantine_profile(spec: SystemSpec, bounds: Bounds, shell_count: int = 8,
                        delta0: float = DELTA0, delta1: float = DELTA1,
                        threads: int = 1) -> DiophantineReport:
    """Shell-wise ``eps_hat(R) = max -log||sigma_L|| / w`` over nonzero symbols, clamped at 0.

    The trend is ``ConditionFails`` when at least half of the outer-half
    shells reach ``delta1``; ``ConditionHolds`` when the outer half is
    nonincreasing and ends at or below ``delta0``, or when an exact global
    lower bound on ``||sigma_L||`` exists; ``Inconclusive`` otherwise.
    """
    check_system(spec)
    check_bounds(bounds, spec.params.m)
    check_positive(shell_count, "shellCount", integer=True, minimum=4)
    if bounds.is_empty:
        raise ContractError("empty grid", contract="nonempty bounds")
    small = small_modes_parallel(spec, bounds, 1.0, threads)
    zero = small.is_zero
    if zero.sum() == bounds.size:
        raise DegenerateSystemError("every symbol vanishes on the grid")
    lo, hi = weight_range(spec.params, bounds)
    edges = shell_edges(lo, hi, shell_count)
    live = ~zero
    modes, log_norm = small.modes[live], small.log_norm[live]
    w = weights(spec.params, modes) if len(modes) else np.zeros(0)
    rate = -log_norm / w if len(modes) else np.zeros(0)
    which = shell_of(w, edges) if len(modes) else np.zeros(0, dtype=np.int64)
    eps = []
    for s in range(shell_count):
        vals = rate[which == s]
        eps.append(max(0.0, float(vals.max())) if vals.size else 0.0)
    shell_eps = [(float(edges[s + 1]), eps[s]) for s in range(shell_count)]
    cert = certified_lower_bound(spec)
    caveats = []
    if cert is not None:
        trend = HOLDS
        caveats.append(f"exact lower bound ||sigma|| >= {cert.value} ({cert.reason})")
    else:
        trend = _trend(eps, delta0, delta1)
        caveats.append("grid-certified only: the condition quantifies over all modes")
    if small.float_zero.any():
        caveats.append("some zeros were detected in floating point (|sigma| < 1e-30)")
    # stable order: decreasing rate, then grid order (j, then tau)
    order = np.lexsort(tuple(modes[:, k] for k in range(modes.shape[1] - 2, -1, -1))
                       + (modes[:, -1], -rate)) if len(modes) else np.zeros(0, dtype=np.int64)
    worst = [(ModeIndex(tuple(int(t) for t in modes[i, :-1]), int(modes[i, -1])),
              float(math.exp(log_norm[i])), float(rate[i]), float(log_norm[i])) for i in order[:10]]
    zero_modes = [ModeIndex(tuple(int(t) for t in r[:-1]), int(r[-1])) for r in small.modes[zero]]
    return DiophantineReport(bounds, shell_eps, trend, worst, zero_modes,
                             bool(small.float_zero[zero].any()), cert, delta0, delta1, caveats)


# ------------------------------------------------------------------ verdicts


@dataclass(frozen=True)
class Verdict:
    kind: str
    reason: str
    exact: bool
    report: DiophantineReport
    resonance: Resonance | None = None
    caveats: list = field(default_factory=list)

    @property
    def holds(self):
        return self.kind == "Holds"

    def to_dict(self):
        rep = self.report.to_dict()
        out = {
            "verdict": self.kind,
            "reason": self.reason,
            "exact": self.exact,
            "grid": rep["grid"],
            "shellEps": rep["shellEps"],
            "trend": rep["trend"],
            "worstModes": rep["worstModes"],
            "zeroSet": [{"tau": list(m.tau), "j": m.j} for m in self.report.zero_modes[:100]],
            "zeroCount": rep["zeroCount"],
            "lowerBound": rep["lowerBound"],
            "caveats": list(rep["caveats"]) + list(self.caveats),
        }
        if self.resonance is not None:
            out["resonance"] = self.resonance.to_dict()
        return out


def _report(spec, bounds, shell_count, report, **kw):
    return report if report is not None else diophantine_profile(spec, bounds, shell_count, **kw)


def hypoellipticity_verdict(spec: SystemSpec, bounds: Bounds, shell_count: int = 8, *,
                            report: DiophantineReport | None = None, **kw) -> Verdict:
    """Finite zero set plus the small-divisor lower bound.

    Fails on an exactly infinite zero set or a failing profile; holds when
    the zero set is certified finite (or empty on the grid) and the profile
    holds. ``exact`` is set only when both halves are certified exactly.
    """
    rep = _report(spec, bounds, shell_count, report, **kw)
    res = resonance_exact(spec)
    caveats = []
    if res.infinite:
        return Verdict("Fails", f"zero set is infinite ({res.reason})", True, rep, res)
    if rep.trend == FAILS:
        return Verdict("Fails", "small divisors decay exponentially on the grid", False, rep, res,
                       ["failure is witnessed on the grid only"])
    finite = res.finite
    if not finite and not rep.zero_modes:
        caveats.append("zero set empty on the grid but not certified beyond it")
    if (finite or not rep.zero_modes) and rep.trend == HOLDS:
        exact = finite and rep.certificate is not None
        if finite and res.partial:
            caveats.append("zero count is an upper bound from an exact subsystem")
        return Verdict("Holds", "finite zero set and lower bound on the symbol", exact, rep, res, caveats)
    why = "zero set on the grid is not certified finite" if not finite and rep.zero_modes else "profile inconclusive"
    return Verdict("Inconclusive", why, False, rep, res, caveats)


def solvability_verdict(spec: SystemSpec, bounds: Bounds, shell_count: int = 8, *,
                        report: DiophantineReport | None = None, **kw) -> Verdict:
    """Lower bound on the symbol off its zeros; the zero set may be infinite."""
    rep = _report(spec, bounds, shell_count, report, **kw)
    if rep.trend == HOLDS:
        return Verdict("Holds", "lower bound on the symbol off its zeros", rep.certificate is not None, rep)
    if rep.trend == FAILS:
        return Verdict("Fails", "small divisors decay exponentially on the grid", False, rep,
                       caveats=["failure is witnessed on the grid only"])
    return Verdict("Inconclusive", "profile inconclusive", False, rep)


def shell_eps_csv(report: DiophantineReport) -> str:
    lines = ["R,epsHat"] + [f"{r!r},{e!r}" for r, e in report.shell_eps]
    return "\n".join(lines) + "\n"
