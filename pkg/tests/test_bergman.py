import math

import pytest
from gmpy2 import mpq

from berezin.bergman import bergman_growth, bergman_partial_sum, q_apply, rho_jets, rho_via_compositions
from berezin.errors import PreconditionError
from berezin.jets import Jet, VariableLayout
from berezin.oracle import bergman_kernel_eval

XY = VariableLayout(1, ("x", "y_c"))


@pytest.mark.parametrize("model, base, expected", [
    ("flat:1", (0, 0), [1, 0, 0, 0, 0, 0]),
    ("fs:0", (0, 0), [1, 1, 0, 0, 0, 0]),
    ("fs:0", (mpq(1, 2), mpq(1, 2)), [1, 1, 0, 0, 0, 0]),
    ("fs:0", (mpq(1, 2), mpq(1, 3)), [1, 1, 0, 0, 0, 0]),
    ("fs:1", (mpq(1, 2), mpq(1, 3)), [1, 2, 0, 0, 0, 0]),
    ("fs:2", (0, 0), [1, 3, 0, 0]),
])
def test_rho_values(model, base, expected):
    assert rho_jets(model, base, len(expected) - 1).values() == expected


@pytest.mark.parametrize("m", [0, 1, 2])
def test_rho_terminates(m):
    vals = rho_jets(f"fs:{m}", (mpq(1, 3), mpq(1, 2)), 6, out_order=0).values()
    assert vals[:2] == [1, m + 1] and all(v == 0 for v in vals[2:])


@pytest.mark.parametrize("m", [0, 1, 2])
@pytest.mark.parametrize("k", [1, 4, 9])
def test_rho_matches_closed_kernel(m, k):
    # diagonal kernel of O(k+m) on CP^1 in the metric frame is (k+m+1)/(2 pi)
    vals = rho_jets(f"fs:{m}", (0, 0), 3, out_order=0).values()
    s = sum(float(v) * k ** -ell for ell, v in enumerate(vals)) * k / (2 * math.pi)
    assert s == pytest.approx(bergman_kernel_eval(k, m, 0, 0), rel=1e-14)


def test_rho_jets_are_jets():
    sym = rho_jets("fs:0", (0, 0), 3)
    assert sym.out_order == 6 and sym.coeffs[3].cap >= 6
    assert sym.coeffs[0].agrees(Jet.constant(XY, 1, 6))


@pytest.mark.parametrize("model, base, cap", [
    ("fs:0", (0, 0), 5), ("fs:1", (mpq(1, 2), mpq(1, 3)), 5), ("pflat:1/10", (0, 0), 6),
    ("pflat:1/10", (mpq(1, 2), mpq(1, 3)), 5),
])
def test_compositions_agree(model, base, cap):
    a = rho_jets(model, base, cap, out_order=0)
    b = rho_via_compositions(model, base, cap)
    assert a.values() == b.values()
    assert b.term_counts == [1] + [2 ** (m - 1) for m in range(1, cap + 1)]


def test_flat_compositions_vanish():
    one = Jet.constant(XY, 1, 6)
    for i in range(1, 4):
        assert q_apply("flat:1", (0, 0), one, i).value() == 0
    assert rho_via_compositions("flat:1", (0, 0), 4).values() == [1, 0, 0, 0, 0]


def test_composition_guard():
    with pytest.raises(PreconditionError):
        rho_via_compositions("fs:0", (0, 0), 9)


@pytest.mark.parametrize("model, k, expected", [
    ("fs:0", 10, 11 / (2 * math.pi)),
    ("flat:1", 7, 7 / (2 * math.pi)),
    ("fs:2", 10, 13 / (2 * math.pi)),
])
def test_partial_sum(model, k, expected):
    assert float(bergman_partial_sum(model, (0, 0), mpq(1, 2), k)) == pytest.approx(expected, rel=1e-25)


def test_partial_sum_rejects_large_eps():
    with pytest.raises(PreconditionError):
        bergman_partial_sum("fs:0", (0, 0), 2, 10, C_fit=1.0)


def test_perturbed_flat_values():
    vals = rho_jets("pflat:1/10", (0, 0), 4, out_order=0).values()
    assert vals == [1, mpq(-1, 10), mpq(1, 25), mpq(-11, 500), mpq(77, 5000)]


def test_growth_stabilizes_on_perturbed_flat():
    C, per, run = bergman_growth("pflat:1/10", (0, 0), 10, kind="power")
    assert all(b <= a + 1e-12 for a, b in zip(run[4:], run[5:]))
    assert all(b <= a + 1e-12 for a, b in zip(per[4:], per[5:]))


def _radial_oracle(lam, L):
    """rho at the origin of pflat from the norm of the constant section.

    With t = |z|^2 the norm is a Laplace integral of exp(-k(t + lam t^2 / 2))(1 + 2 lam t);
    expanding the quartic factor termwise gives ``k * norm`` as a series in 1/k,
    and the kernel symbol is its reciprocal.
    """
    s = [mpq(0)] * (L + 2)
    for j in range(L + 1):
        c = (-lam / 2) ** j / math.factorial(j)
        s[j] += c * math.factorial(2 * j)
        if j + 1 <= L + 1:
            s[j + 1] += c * 2 * lam * math.factorial(2 * j + 1)
    inv = [mpq(1)]
    for ell in range(1, L + 1):
        inv.append(-sum(s[i] * inv[ell - i] for i in range(1, ell + 1)))
    return inv


@pytest.mark.parametrize("lam", [mpq(1, 10), mpq(-1, 7)])
def test_perturbed_flat_matches_laplace_integral(lam):
    L = 7
    assert rho_jets(f"pflat:{lam}", (0, 0), L, out_order=0).values() == _radial_oracle(lam, L)
