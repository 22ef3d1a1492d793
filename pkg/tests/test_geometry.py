import math

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from berezin.errors import InadmissibleBaseError, PreconditionError
from berezin.geometry import c_jet, cprime_jet, log_e_norm, metric_data, parse_model, potential_jet
from berezin.jets import Jet, jet_mul


def coeffs(jet):
    return {k: v for k, v in jet.items()}


def test_flat_potential_bilinear():
    x0, y0 = mpq(1, 3), mpq(-2, 5)
    p = potential_jet("flat:1", (x0, y0), 3)
    assert coeffs(p) == {(0, 0): x0 * y0, (1, 0): y0, (0, 1): x0, (1, 1): 1}


def test_fs_potential_mercator():
    p = potential_jet("fs:0", (0, 0), 4)
    assert coeffs(p) == {(1, 1): 1, (2, 2): mpq(-1, 2)}


def test_fs_potential_at_one():
    p = potential_jet("fs:0", (1, 1), 1)
    assert p[(1, 0)] == p[(0, 1)] == mpq(1, 2)
    assert abs(float(p[(0, 0)]) - math.log(2)) < 1e-25


def test_inadmissible_base():
    with pytest.raises(InadmissibleBaseError):
        potential_jet("fs:0", (1, -1), 2)
    with pytest.raises(InadmissibleBaseError):
        potential_jet("pflat:1/10", (3, 3), 2)


@pytest.mark.parametrize("model, base, G, b", [
    ("flat:1", (0, 0), 1, 1),
    ("fs:0", (0, 0), 1, 1),
    ("fs:0", (1, 1), mpq(1, 4), 4),
])
def test_metric_examples(model, base, G, b):
    G0, Gi0, b0, d0 = metric_data(model, base, 2).at_base()
    assert G0 == [[G]] and b0 == b and d0 == G


@pytest.mark.parametrize("model, base", [
    ("fs:0", (mpq(1, 2), mpq(1, 3))), ("fs:2", (mpq(-1, 4), mpq(2, 3))),
    ("pflat:1/10", (mpq(1, 2), mpq(1, 2))), ("flat:2", ((mpq(1, 2), 0), (1, mpq(1, 3)))),
])
def test_metric_inverse_identities(model, base):
    pd = metric_data(model, base, 5)
    n = len(pd.G)
    for i in range(n):
        for j in range(n):
            s = sum((jet_mul(pd.G[i][k], pd.Ginv[k][j], 5) for k in range(n)), Jet.zero(pd.b.layout, 5))
            assert s.agrees(Jet.constant(pd.b.layout, int(i == j), 5))
    assert jet_mul(pd.b, pd.delta, 5).agrees(Jet.constant(pd.b.layout, 1, 5))


def test_c_flat_vanishes():
    assert not c_jet("flat:1", (mpq(2, 3), mpq(-1, 7)), 6).coeffs


def test_c_fs_origin():
    c = c_jet("fs:0", (0, 0), 6)
    assert coeffs(c) == {(2, 2): mpq(1, 2), (3, 3): mpq(-1, 3)}
    assert c[(2, 1)] == 0


@pytest.mark.parametrize("model", ["fs:0", "fs:1", "fs:2", "pflat:1/10", "pflat:-1/3"])
@pytest.mark.parametrize("base", [(0, 0), (mpq(1, 2), mpq(1, 3)), (mpq(-1, 3), mpq(1, 5))])
def test_c_has_only_mixed_terms(model, base):
    c = c_jet(model, base, 8)
    for (a, b), v in c.items():
        assert a >= 1 and b >= 1


@pytest.mark.parametrize("model, expected", [
    ("flat:1", {(0, 0): 1}),
    ("fs:0", {(0, 0): 1, (1, 1): -2, (2, 2): 3}),
    ("fs:2", {(0, 0): 1, (1, 1): -4, (2, 2): 10}),
])
def test_cprime_examples(model, expected):
    assert coeffs(cprime_jet(model, (0, 0), 4)) == expected


@pytest.mark.parametrize("base", [(mpq(1, 2), mpq(1, 3)), (1, 1), (mpq(-2, 3), mpq(1, 7))])
def test_cprime_at_base_is_density(base):
    assert cprime_jet("fs:0", base, 0).value() == metric_data("fs:0", base, 0).delta.value()


def test_log_e_norm_examples():
    assert log_e_norm("fs:0", 1, 1) == 0
    assert log_e_norm("fs:0", 1, -1) == -math.inf
    assert abs(log_e_norm("fs:0", 1, 0) + 0.5 * math.log(2)) < 1e-12
    with pytest.raises(PreconditionError):
        log_e_norm("pflat:1/10", 0, 0)


points = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(points, points)
def test_log_e_norm_negative_off_diagonal(z, w):
    if abs(z - w) < 1e-3:
        return
    assert log_e_norm("fs:0", z, w) < 0
    assert log_e_norm("flat:1", z, w) < 0


def test_model_strings():
    assert parse_model("flat:2").n == 2
    assert parse_model("fs:1").n == 1
    with pytest.raises(ValueError):
        parse_model("sphere")
