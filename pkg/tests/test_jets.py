import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from berezin.errors import InsufficientOrderError, LayoutError, ModeError
from berezin.jets import (Jet, MultiIndex, VariableLayout, delta_power_apply, jet_binomial, jet_derive,
                          jet_exp, jet_log1p, jet_mul)

UV = VariableLayout(1, ("u", "v"))
U, V = Jet.variable(UV, "u", 8), Jet.variable(UV, "v", 8)


def poly(coeffs, cap, lay=UV):
    return Jet(lay, {k: mpq(c) for k, c in coeffs.items()}, cap)


rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6).map(lambda f: mpq(f.numerator, f.denominator))


@st.composite
def jets(draw, cap=5, lay=UV):
    terms = draw(st.dictionaries(
        st.tuples(*[st.integers(0, cap)] * lay.nvars).filter(lambda k: sum(k) <= cap), rationals, max_size=8))
    return Jet(lay, terms, cap)


def brute_mul(a, b, cap):
    out = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            if sum(k) <= cap:
                out[k] = out.get(k, 0) + ca * cb
    return {k: v for k, v in out.items() if v != 0}


def test_multi_index():
    m = MultiIndex((2, 0, 1))
    assert m.order == 3 and m.factorial() == 2


def test_layout_index_forms():
    lay = VariableLayout(2)
    assert lay.nvars == 8
    assert lay.index("u1") == lay.index(("u", 1)) == 5
    with pytest.raises(LayoutError):
        lay.index("w")


def test_mul_examples():
    p = jet_mul(1 + U, 1 + V, 2)
    assert dict(p.items()) == {(0, 0): 1, (1, 0): 1, (0, 1): 1, (1, 1): 1}
    q = jet_mul(1 + U + U * U, 1 + U + U * U, 2)
    assert dict(q.items()) == {(0, 0): 1, (1, 0): 2, (2, 0): 3}


@settings(max_examples=40, deadline=None)
@given(jets(), jets(), st.integers(0, 8))
def test_mul_matches_convolution(a, b, cap):
    p = jet_mul(a, b, cap)
    assert dict(p.items()) == brute_mul(a, b, min(cap, p.cap))
    assert p.cap == min(cap, a.cap, b.cap)


@settings(max_examples=25, deadline=None)
@given(jets(), jets(), jets())
def test_ring_axioms(a, b, c):
    assert jet_mul(jet_mul(a, b), c) == jet_mul(a, jet_mul(b, c))
    assert jet_mul(a, b + c) == jet_mul(a, b) + jet_mul(a, c)
    assert jet_mul(a, b) == jet_mul(b, a)


def test_region_and_errors():
    a = poly({(0, 0): 1}, 2)
    assert a[(2, 0)] == 0
    with pytest.raises(InsufficientOrderError):
        a[(3, 0)]
    with pytest.raises(LayoutError):
        a + Jet.zero(VariableLayout(1, ("x", "y_c")), 2)
    with pytest.raises(ModeError):
        a + a.to_float()


def test_exp_examples():
    assert jet_exp(Jet.zero(UV, 4)) == Jet.constant(UV, 1, 4)
    e = jet_exp(U + V, 2)
    assert e == jet_mul(1 + U + V, Jet.constant(UV, 1, 2), 2) + jet_mul(U + V, U + V, 2).scale(mpq(1, 2))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_exp_of_log_is_binomial(m):
    uv = jet_mul(U, V, 4)
    lhs = jet_exp(jet_log1p(uv, 4).scale(-m), 4)
    assert lhs == jet_binomial(uv, -m, 4)


def test_derive_examples():
    a = poly({(2, 1): 1}, 4)
    assert dict(jet_derive(a, "u").items()) == {(1, 1): 2}
    assert not jet_derive(poly({(0, 0): 1, (1, 0): 1}, 3), "v").coeffs
    assert jet_derive(a, "u").cap == 3


@settings(max_examples=20, deadline=None)
@given(jets())
def test_mixed_partials_commute(a):
    assert jet_derive(jet_derive(a, "u"), "v") == jet_derive(jet_derive(a, "v"), "u")


@pytest.mark.parametrize("ginv, exps, m, expected", [
    ([[1]], (1, 1), 1, 1),
    ([[1]], (2, 2), 2, 4),
    ([[2]], (1, 1), 1, 2),
])
def test_delta_power(ginv, exps, m, expected):
    a = Jet.monomial(UV, exps, 6)
    assert delta_power_apply(a, ginv, m).value() == expected


@settings(max_examples=15, deadline=None)
@given(jets(cap=6), st.integers(1, 3))
def test_delta_power_composes(a, m):
    step = a
    for _ in range(m):
        step = delta_power_apply(step, [[1]], 1)
    assert delta_power_apply(a, [[1]], m) == step


def test_delta_dimension_mismatch():
    with pytest.raises(LayoutError):
        delta_power_apply(U, [[1, 0], [0, 1]], 1)


def test_exact_reproducible():
    a = poly({(1, 0): mpq(1, 3), (0, 2): mpq(-2, 7)}, 6)
    r1 = jet_exp(jet_mul(a, a), 6)
    r2 = jet_exp(jet_mul(a, a), 6)
    assert sorted(r1.items()) == sorted(r2.items())
