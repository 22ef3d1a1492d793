from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpq

from berezin.scalars import (QQi, format_scalar, is_exact, parse_scalar, precision_digits, to_float)


@pytest.mark.parametrize("text, expected", [
    ("3/4", mpq(3, 4)),
    ("+3/4", mpq(3, 4)),
    ("-2", mpq(-2)),
    ("0", mpq(0)),
])
def test_parse_rational(text, expected):
    assert parse_scalar(text) == expected


@pytest.mark.parametrize("text, re, im", [
    ("1+2i", 1, 2),
    ("3i", 0, 3),
    ("-i", 0, -1),
    ("1/2-1/3i", mpq(1, 2), mpq(-1, 3)),
])
def test_parse_complex(text, re, im):
    z = parse_scalar(text)
    assert isinstance(z, QQi)
    assert (z.re, z.im) == (re, im)


def test_floats_need_flag():
    with pytest.raises(ValueError):
        parse_scalar("0.5")
    assert float(parse_scalar("0.5", allow_float=True)) == 0.5


def test_qqi_arithmetic():
    a, b = QQi(1, 2), QQi(mpq(1, 2), -1)
    assert a * b == QQi(mpq(5, 2), 0)
    assert (a / a) == 1
    assert a.conjugate() == QQi(1, -2)
    assert a + mpq(1, 2) == QQi(mpq(3, 2), 2)
    assert complex(a) == 1 + 2j


@pytest.mark.parametrize("x, s", [(mpq(3, 4), "3/4"), (mpq(5), "5"), (QQi(1, -2), "1-2i"), (Fraction(1, 3), "1/3")])
def test_format_roundtrip(x, s):
    assert format_scalar(x) == s
    assert parse_scalar(s) == x


def test_working_precision():
    assert precision_digits() >= 30
    assert gmpy2.get_context().precision >= 100
    assert not is_exact(to_float(mpq(1, 3)))
