"""Continued fractions with exact big-integer convergents and log-space bounds.

For a convergent ``p_k / q_k`` of ``alpha`` the classical sandwich

    1 / (q_{k+1} + q_k) <= |q_k alpha - p_k| <= 1 / q_{k+1}

gives certified bounds on the small divisor without ever evaluating
``alpha``. Quotients such as ``2**q_k`` are far too large to write down,
so they are kept as power forms and only their logarithms are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._numbers import LN2, log_int
from .exceptions import ContractError, InsufficientDepthError

# integers above this many bits are kept symbolic
BIT_LIMIT = 4_000_000
FLAG_THRESHOLD = 1e-3
EPS_GRID = tuple(np.logspace(-3, 0, 13))


@dataclass(frozen=True)
class PowerForm:
    """The integer ``base ** exponent`` held symbolically."""

    base: int
    exponent: int

    def __post_init__(self):
        if self.base < 2 or self.exponent < 0:
            raise ContractError(f"bad power form {self.base}**{self.exponent}", contract="quotient >= 1")

    @property
    def bits(self) -> float:
        if self.exponent.bit_length() > 900:
            return math.inf
        return self.exponent * math.log2(self.base)

    def materialize(self):
        if self.bits > BIT_LIMIT:
            return None
        return self.base ** self.exponent


@dataclass(frozen=True)
class BigLog:
    """A positive real ``K * unit + rest`` used for logarithms of huge integers.

    ``K`` is an exact integer, ``unit`` is ``log(base)`` for the power that
    produced it (``ln 2`` for powers of two), ``rest`` is a double.
    """

    K: int = 0
    unit: float = LN2
    rest: float = 0.0

    @classmethod
    def of_int(cls, n: int) -> "BigLog":
        return cls(0, LN2, log_int(n))

    def to_float(self) -> float:
        if self.K == 0:
            return self.rest
        if self.K.bit_length() > 1000:
            return math.inf
        return self.K * self.unit + self.rest

    def log(self) -> float:
        """``log`` of the represented value (which must be positive)."""
        if self.K == 0:
            return math.log(self.rest)
        ratio = 0.0 if self.K.bit_length() > 1000 else self.rest / self.K
        return log_int(self.K) + math.log(self.unit + ratio)


def _factorial_power(base: int):
    def rule(k, q_prev):
        return PowerForm(base, math.factorial(k))
    return rule


def _exp_rule(base: int):
    def rule(k, q_prev):
        return PowerForm(base, q_prev)
    return rule


class ContinuedFraction:
    """``[0; a_1, a_2, ...]`` from an explicit prefix or a generator rule.

    A rule is called as ``rule(k, q_{k-1})`` and returns the quotient
    ``a_k`` as an int or :class:`PowerForm`.
    """

    def __init__(self, quotients: Sequence[int] | None = None,
                 rule: Callable | None = None, name: str = "custom"):
        if (quotients is None) == (rule is None):
            raise ContractError("give either quotients or a rule", contract="continued fraction input")
        if quotients is not None:
            quotients = [int(a) for a in quotients]
            if any(a < 1 for a in quotients):
                raise ContractError("partial quotients must be >= 1", contract="a_k >= 1")
        self.quotients = quotients
        self.rule = rule
        self.name = name

    @classmethod
    def periodic(cls, period: Sequence[int], name=None):
        period = [int(a) for a in period]
        if not period or min(period) < 1:
            raise ContractError("period must be nonempty with entries >= 1", contract="a_k >= 1")
        return cls(rule=lambda k, q: period[(k - 1) % len(period)],
                   name=name or f"periodic:{','.join(map(str, period))}")

    @classmethod
    def golden(cls):
        return cls.periodic([1], name="golden")

    @classmethod
    def factorial_power(cls, base: int = 10):
        """``a_k = base ** (k!)``."""
        return cls(rule=_factorial_power(int(base)), name=f"factorial-power:{base}")

    @classmethod
    def exp_rule(cls, base: int = 2):
        """``a_{k+1} = base ** q_k`` starting from ``q_0 = 1``."""
        return cls(rule=_exp_rule(int(base)), name=f"exp:{base}")

    @classmethod
    def from_rule_string(cls, text: str):
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "factorial-power":
                return cls.factorial_power(int(arg or 10))
            if kind == "exp":
                return cls.exp_rule(int(arg or 2))
            if kind == "periodic":
                return cls.periodic([int(a) for a in arg.split(",")])
            if kind == "golden":
                return cls.golden()
        except ValueError as exc:
            raise ContractError(f"bad rule argument in {text!r}", contract="continued fraction rule") from exc
        raise ContractError(f"unknown rule {text!r}", contract="continued fraction rule")

    def quotient(self, k: int, q_prev: int):
        if self.quotients is not None:
            if k > len(self.quotients):
                return None
            return self.quotients[k - 1]
        a = self.rule(k, q_prev)
        if isinstance(a, int) and a < 1:
            raise ContractError(f"rule produced a_{k} = {a}", contract="a_k >= 1")
        return a


@dataclass(frozen=True)
class ConvergentBounds:
    """Convergent ``p/q`` at index ``k`` and the sandwich for ``log|q alpha - p|``."""

    k: int
    p: int
    q: int
    log_q_next: BigLog
    log_q_next_plus_q: BigLog

    @property
    def log_upper(self) -> float:
        return -self.log_q_next.to_float()

    @property
    def log_lower(self) -> float:
        return -self.log_q_next_plus_q.to_float()

    def eps_hat(self, sigma) -> float:
        """``-logUpper / q**(1/sigma)``, computed through logarithms."""
        x = self.log_q_next.log() - log_int(self.q) / float(sigma)
        return math.exp(x) if x < 709.0 else math.inf


def convergents(cf: ContinuedFraction, depth: int) -> list:
    """Convergents ``k = 1..depth`` with their sandwich bounds.

    Needs quotients up to ``a_{depth+1}`` so that ``q_{depth+1}`` exists;
    a quotient too large to materialise is allowed only in that last slot.
    """
    if depth < 1:
        raise ContractError("depth must be >= 1", contract="depth >= 1")
    p2, q2, p1, q1 = 1, 0, 0, 1  # p_{k-2}, q_{k-2}, p_{k-1}, q_{k-1}
    out = []
    for k in range(1, depth + 2):
        a = cf.quotient(k, q1)
        if a is None:
            raise InsufficientDepthError(
                f"depth {depth} needs {depth + 1} quotients, only {k - 1} available")
        if isinstance(a, PowerForm):
            val = a.materialize()
            if val is None:
                if k <= depth:
                    raise InsufficientDepthError(
                        f"a_{k} has about {a.bits:.3g} bits; depth {depth} is out of reach")
                # q_{k} = a q_{k-1} + q_{k-2}; the second term changes the log by < 2**-bits
                unit = math.log(a.base)
                next_log = BigLog(a.exponent, unit, log_int(q1))
                out.append(ConvergentBounds(k - 1, p1, q1, next_log, next_log))
                break
            a = val
        p, q = a * p1 + p2, a * q1 + q2
        if k >= 2:
            out.append(ConvergentBounds(k - 1, p1, q1, BigLog.of_int(q), BigLog.of_int(q + q1)))
        p2, q2, p1, q1 = p1, q1, p, q
    return out


@dataclass(frozen=True)
class LiouvilleVerdict:
    verdict: str
    certified: bool
    order_witness: float | None
    sigma: float
    depth: int
    rows: list = field(default_factory=list)

    @property
    def flagged(self):
        return self.verdict == "Flagged"

    def to_dict(self):
        return {"verdict": self.verdict, "certified": self.certified,
                "orderWitness": self.order_witness, "sigma": float(self.sigma),
                "depth": self.depth, "convergents": self.rows}


def _rows(bounds, sigma):
    rows = []
    for c in bounds:
        lu = c.log_upper
        rows.append({"k": c.k, "qBits": c.q.bit_length(),
                     "logUpper": lu if math.isfinite(lu) else None,
                     "logLogAbsUpper": c.log_q_next.log(),
                     "epsHat": c.eps_hat(sigma)})
    return rows


def exp_liouville_test(cf: ContinuedFraction, sigma=1, depth: int = 4,
                       threshold: float = FLAG_THRESHOLD, eps_grid=EPS_GRID) -> LiouvilleVerdict:
    """Flag ``alpha`` as exponential Liouville of order ``sigma`` along its convergents.

    ``eps_hat_k = log q_{k+1} / q_k**(1/sigma)``. The number is Flagged
    when ``min eps_hat_k`` over the last half of the depths is at least
    ``threshold`` (that minimum is the order witness). Otherwise it is
    NotFlaggedUpToDepth, certified when at the last depth
    ``log(q_{k+1} + q_k) < eps * q_k**(1/sigma)`` for every ``eps`` on the grid,
    i.e. the exact lower bound beats ``exp(-eps q**(1/sigma))``.
    """
    if depth < 3:
        raise ContractError("depth must be >= 3", contract="depth >= 3")
    if sigma < 1:
        raise ContractError("sigma must be >= 1", contract="sigma >= 1")
    bounds = convergents(cf, depth)
    eps = [c.eps_hat(sigma) for c in bounds]
    tail = eps[depth // 2:]
    rows = _rows(bounds, sigma)
    if min(tail) >= threshold:
        return LiouvilleVerdict("Flagged", True, min(tail), sigma, depth, rows)
    last = bounds[-1]
    lhs = last.log_q_next_plus_q.log()
    qlog = log_int(last.q) / float(sigma)
    certified = all(lhs < math.log(e) + qlog for e in eps_grid)
    return LiouvilleVerdict("NotFlaggedUpToDepth", certified, None, sigma, depth, rows)


@dataclass(frozen=True)
class VectorVerdict:
    verdict: str
    coordinate: int | None
    coordinates: list

    def to_dict(self):
        return {"verdict": self.verdict, "coordinate": self.coordinate,
                "coordinates": [c.to_dict() for c in self.coordinates]}


def vector_coordinate_test(cfs: Sequence[ContinuedFraction], sigma=1, depth: int = 4) -> VectorVerdict:
    """A vector is not exponential Liouville if one coordinate is not.

    Returns the first (1-based) coordinate whose test is certified
    NotFlaggedUpToDepth with ``eps_hat`` nonincreasing over the last half
    of the depths; Inconclusive if none qualifies (a vector can be
    non-Liouville even when every coordinate is Liouville).
    """
    if not cfs:
        raise ContractError("need at least one coordinate", contract="m >= 1")
    results = []
    for i, cf in enumerate(cfs, start=1):
        res = exp_liouville_test(cf, sigma, depth)
        results.append(res)
        tail = [r["epsHat"] for r in res.rows][depth // 2:]
        steady = all(b <= a for a, b in zip(tail, tail[1:]))
        if res.verdict == "NotFlaggedUpToDepth" and res.certified and steady:
            return VectorVerdict("VectorNotExpLiouville", i, results)
    return VectorVerdict("Inconclusive", None, results)
