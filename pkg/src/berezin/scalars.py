"""Scalar arithmetic: exact (Gaussian) rationals and high-precision floats.

Exact real scalars are ``gmpy2.mpq``; exact complex scalars are :class:`QQi`
(a pair of ``mpq``).  Float mode uses ``gmpy2.mpfr``/``gmpy2.mpc`` with a
working precision of ``BEREZIN_PRECISION`` significant digits (default 30).
"""
from __future__ import annotations

import math
import os
import re
from fractions import Fraction

import gmpy2
from gmpy2 import mpq, mpfr, mpc

EXACT = "exact"
FLOAT = "float"

DEFAULT_DIGITS = 30


def precision_digits() -> int:
    raw = os.environ.get("BEREZIN_PRECISION", "")
    try:
        digits = int(raw) if raw else DEFAULT_DIGITS
    except ValueError:
        digits = DEFAULT_DIGITS
    return max(digits, DEFAULT_DIGITS)


def float_context() -> gmpy2.context:
    """gmpy2 context with the working float precision (bits)."""
    bits = int(math.ceil(precision_digits() * math.log2(10))) + 8
    return gmpy2.context(precision=bits)


def apply_precision() -> None:
    """Raise the current gmpy2 context precision to the working precision."""
    ctx = gmpy2.get_context()
    ctx.precision = max(ctx.precision, float_context().precision)


apply_precision()


class QQi:
    """Exact complex rational ``re + i*im`` with ``mpq`` parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = mpq(re)
        self.im = mpq(im)

    @staticmethod
    def _coerce(other):
        if isinstance(other, QQi):
            return other
        if isinstance(other, (int, Fraction)) or type(other) is type(mpq(0)) or type(other) is type(gmpy2.mpz(0)):
            return QQi(other, 0)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QQi(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QQi(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QQi(o.re - self.re, o.im - self.im)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QQi(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("QQi division by zero")
        num = self * o.conjugate()
        return QQi(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return QQi(1) / (self ** (-k))
        out, base = QQi(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self):
        return QQi(self.re, -self.im)

    def __abs__(self):
        return math.hypot(float(self.re), float(self.im))

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"QQi({self.re}, {self.im})"


_MPQ = type(mpq(0))
_MPZ = type(gmpy2.mpz(0))
_MPFR = type(mpfr(0))
_MPC = type(mpc(0))
EXACT_TYPES = (int, _MPQ, _MPZ, Fraction, QQi)
FLOAT_TYPES = (float, complex, _MPFR, _MPC)


def mode_of(x) -> str:
    if isinstance(x, EXACT_TYPES) and not isinstance(x, bool):
        return EXACT
    if isinstance(x, FLOAT_TYPES):
        return FLOAT
    raise TypeError(f"unsupported scalar type {type(x).__name__}")


def is_exact(x) -> bool:
    return mode_of(x) == EXACT


def exact(x):
    """Normalize an exact scalar to ``mpq`` (real) or :class:`QQi`."""
    if isinstance(x, QQi):
        return x if x.im != 0 else x.re
    if isinstance(x, (int, _MPQ, _MPZ, Fraction)):
        return mpq(x)
    raise TypeError(f"not an exact scalar: {x!r}")


def to_float(x):
    """Convert any scalar to working-precision float (mpfr or mpc)."""
    with float_context():
        if isinstance(x, QQi):
            if x.im == 0:
                return mpfr(x.re)
            return mpc(mpfr(x.re), mpfr(x.im))
        if isinstance(x, (complex, _MPC)):
            return mpc(x)
        return mpfr(x)


def conj(x):
    if isinstance(x, QQi):
        return x.conjugate()
    if isinstance(x, (complex, _MPC)):
        return x.conjugate()
    return x


def magnitude(x) -> float:
    """|x| as a Python float."""
    if isinstance(x, QQi):
        return abs(x)
    if isinstance(x, _MPC):
        return float(abs(x))
    return abs(float(x)) if not isinstance(x, complex) else abs(x)


def to_complex(x) -> complex:
    if isinstance(x, (QQi, complex)):
        return complex(x)
    if isinstance(x, _MPC):
        return complex(float(x.real), float(x.imag))
    return complex(float(x), 0.0)


_RAT_RE = re.compile(r"^[+-]?\d+(?:/\d+)?$")
_CPLX_RE = re.compile(r"^(?P<re>[+-]?\d+(?:/\d+)?(?=[+-]))?(?P<im>[+-]?(?:\d+(?:/\d+)?)?)[ij]$")


def _q(text: str):
    return mpq(text.lstrip("+"))


def parse_scalar(text: str, allow_float: bool = False):
    """Parse ``p/q``, an integer, or ``a+bi`` with rational parts.

    Decimal literals are accepted only when ``allow_float`` is set.
    """
    s = str(text).strip().replace(" ", "")
    if _RAT_RE.match(s):
        return _q(s)
    m = _CPLX_RE.match(s)
    if m:
        re_part = _q(m.group("re")) if m.group("re") else mpq(0)
        im_txt = m.group("im")
        if im_txt in ("", "+"):
            im_part = mpq(1)
        elif im_txt == "-":
            im_part = mpq(-1)
        else:
            im_part = _q(im_txt)
        return exact(QQi(re_part, im_part))
    if allow_float:
        try:
            if "i" in s or "j" in s:
                return to_float(complex(s.replace("i", "j")))
            return to_float(float(s))
        except ValueError:
            pass
    raise ValueError(f"not a rational literal: {text!r} (floats need --float)")


def format_scalar(x) -> str:
    """Rational scalars as ``p/q`` strings; floats with full working digits."""
    if isinstance(x, QQi):
        if x.im == 0:
            return format_scalar(x.re)
        sign = "+" if x.im >= 0 else "-"
        return f"{format_scalar(x.re)}{sign}{format_scalar(abs(x.im))}i"
    if isinstance(x, (int, _MPZ)):
        return str(int(x))
    if isinstance(x, (_MPQ, Fraction)):
        q = mpq(x)
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    digits = precision_digits()
    if isinstance(x, (_MPC, complex)):
        z = mpc(x)
        return f"{float(z.real):.17g}{float(z.imag):+.17g}i"
    return f"{mpfr(x):.{digits}g}" if isinstance(x, _MPFR) else repr(float(x))


def factorial(n: int) -> int:
    return math.factorial(n)
