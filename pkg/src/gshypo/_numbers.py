"""Exact scalars: Gaussian rationals, number parsing and big-integer logarithms."""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction

LN2 = math.log(2.0)

_NAMED = {"pi": math.pi, "e": math.e}


def log_int(n: int) -> float:
    """Natural log of a positive (possibly huge) integer in double precision.

    The top 64 bits carry the mantissa, the bit length carries the exponent,
    so the absolute error stays at the 1e-15 level for any size.
    """
    if n <= 0:
        raise ValueError("log_int needs a positive integer")
    shift = n.bit_length() - 64
    if shift <= 0:
        return math.log(n)
    return math.log(n >> shift) + shift * LN2


def log_fraction(x: Fraction) -> float:
    return log_int(x.numerator) - log_int(x.denominator)


def parse_real(value):
    """Parse a config scalar.

    Strings ``"p/q"`` and decimal strings become exact :class:`Fraction`;
    Python ints stay exact; floats and named constants (``"pi"``,
    ``"sqrt(2)"``) are inexact floats.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip().lower()
        if text in _NAMED:
            return _NAMED[text]
        if text.startswith("sqrt(") and text.endswith(")"):
            return math.sqrt(float(parse_real(text[5:-1])))
        if text.startswith("-") and text[1:].strip() in _NAMED:
            return -_NAMED[text[1:].strip()]
        try:
            return Fraction(text)
        except ValueError:
            return float(text)
    if isinstance(value, numbers.Real):
        return float(value)
    raise TypeError(f"cannot parse {value!r} as a real number")


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


def format_real(x):
    """Inverse of :func:`parse_real`: exact values become ``"p/q"`` strings, floats stay floats."""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return str(x)
    return float(x)


@dataclass(frozen=True)
class ExactComplex:
    """Gaussian rational ``re + i*im`` with Fraction parts."""

    re: Fraction
    im: Fraction = Fraction(0)

    @classmethod
    def coerce(cls, value):
        """Return an ExactComplex for exact input, else None."""
        if isinstance(value, ExactComplex):
            return value
        if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            return cls(Fraction(value))
        if isinstance(value, tuple) and len(value) == 2 and all(is_exact(v) for v in value):
            return cls(Fraction(value[0]), Fraction(value[1]))
        return None

    def __add__(self, other):
        other = ExactComplex.coerce(other)
        if other is None:
            return NotImplemented
        return ExactComplex(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def __sub__(self, other):
        other = ExactComplex.coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        other = ExactComplex.coerce(other)
        if other is None:
            return NotImplemented
        return ExactComplex(self.re * other.re - self.im * other.im,
                            self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        other = ExactComplex.coerce(other)
        if other is None:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def log_abs(self) -> float:
        """log|z| without overflow or underflow; -inf for zero."""
        a2 = self.abs2()
        if a2 == 0:
            return -math.inf
        return 0.5 * log_fraction(a2)

    def __str__(self):
        if not self.im:
            return str(format_real(self.re))
        return f"{format_real(self.re)}{'+' if self.im >= 0 else '-'}{format_real(abs(self.im))}i"


def parse_complex(value):
    """Parse a coupling or coefficient.

    Accepts a scalar (see :func:`parse_real`), a ``[re, im]`` pair, a
    mapping with ``re``/``im`` keys, or a Python complex. Returns an
    :class:`ExactComplex` when both parts are exact, else a Python complex.
    """
    if isinstance(value, ExactComplex):
        return value
    if isinstance(value, complex):
        return value
    if isinstance(value, dict):
        re, im = parse_real(value.get("re", 0)), parse_real(value.get("im", 0))
    elif isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex pair must have two entries, got {value!r}")
        re, im = parse_real(value[0]), parse_real(value[1])
    else:
        re, im = parse_real(value), Fraction(0)
    if is_exact(re) and is_exact(im):
        return ExactComplex(Fraction(re), Fraction(im))
    return complex(float(re), float(im))


def to_complex(value) -> complex:
    return complex(value)


def format_complex(value):
    if isinstance(value, ExactComplex):
        return {"re": format_real(value.re), "im": format_real(value.im)}
    value = complex(value)
    return {"re": value.real, "im": value.imag}
