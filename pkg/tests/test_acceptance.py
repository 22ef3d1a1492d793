"""Acceptance suite: one recorded pass/fail line per criterion.

Lines marked ``info`` are diagnostics outside the pass/fail contract.
"""
import math
import random
import time

import numpy as np
import pytest
from gmpy2 import mpq

from berezin.bergman import rho_jets
from berezin.contravariant import b_inverse_coefficients, b_inverse_map, b_map
from berezin.jets import Jet, VariableLayout
from berezin.oracle import OracleSymbol, bergman_kernel_eval, compare_product, covariant_from_oracle, offdiag_rate
from berezin.starproduct import SymbolPrefix, a_ell, a_table, fit_a_growth, multi_indices, star_product, taylor_slot
from berezin.symbols import (OperatorSeries, check_remainder_bound, fit_factorial_growth, invert_operator_series,
                             partial_sum, running_constants)

XY = VariableLayout(1, ("x", "y_c"))
H = OracleSymbol.parse("h")
ONE = OracleSymbol.parse("1")


def random_poly(rng, deg, cap):
    return Jet(XY, {(a, b): mpq(rng.randint(-6, 6), rng.randint(1, 4))
                    for a in range(deg + 1) for b in range(deg + 1 - a)}, cap)


def stable_after(run, first=4):
    """Running constants never increase once the first ``first`` orders are in."""
    tail = run[first - 1:]
    return all(b <= a * (1 + 1e-12) for a, b in zip(tail, tail[1:]))


def test_criterion_01_flat_wick(criterion):
    t0 = time.perf_counter()
    tab = a_table("flat:1", (0, 0), 6)
    ok = all(v == (1 if al.order == be.order == ell else 0) for (ell, al, be), v in tab.entries.items())
    dt = time.perf_counter() - t0
    assert criterion(1, "flat Wick table, l <= 6", ok and dt < 10, f"{len(tab.entries)} entries, {dt:.2f}s")


def test_criterion_02_bergman_coefficients(criterion):
    t0 = time.perf_counter()
    cases = [("flat:1", (0, 0), [1, 0, 0, 0, 0, 0], 0), ("fs:0", (0, 0), [1, 1, 0, 0, 0, 0], 0),
             ("fs:0", (mpq(1, 2), mpq(1, 2)), [1, 1, 0, 0, 0, 0], 0), ("fs:2", (0, 0), [1, 3, 0, 0], 2)]
    ok = True
    for model, base, expected, m in cases:
        vals = rho_jets(model, base, len(expected) - 1).values()
        ok &= vals == expected
        if model.startswith("fs"):
            # cross-check against the closed-form diagonal kernel (k + m + 1) / 2 pi
            for k in (3, 10, 40):
                series = sum(float(v) * k ** -ell for ell, v in enumerate(vals)) * k / (2 * math.pi)
                ok &= math.isclose(series, bergman_kernel_eval(k, m, 0, 0), rel_tol=1e-14)
    dt = time.perf_counter() - t0
    assert criterion(2, "Bergman coefficients exact", ok and dt < 120, f"{dt:.2f}s")


def test_criterion_03_decomposition_identity(criterion):
    rng = random.Random(2024)
    bad = []
    for model, base in [("fs:0", (mpq(1, 2), mpq(1, 3))), ("pflat:1/10", (mpq(-1, 3), mpq(1, 2)))]:
        for ell in range(6):
            f, g = random_poly(rng, 4, 10), random_poly(rng, 4, 10)
            tab = a_table(model, base, ell)
            rhs = mpq(0)
            for al in multi_indices(1, ell):
                for be in multi_indices(1, ell):
                    a = tab[(ell, tuple(al), tuple(be))]
                    rhs += a * taylor_slot(f, "y_c", tuple(be)).value() * taylor_slot(g, "x", tuple(al)).value()
            if a_ell(model, base, f, g, ell) != math.factorial(ell) * rhs:
                bad.append((model, ell))
    assert criterion(3, "decomposition identity, l <= 5", not bad, f"mismatches {bad}" if bad else "exact")


def test_criterion_04_star_algebra(criterion):
    cap = 4
    ok = True
    for model, base in [("fs:0", (mpq(1, 2), mpq(1, 3))), ("pflat:1/10", (mpq(1, 3), mpq(1, 2)))]:
        rng = random.Random(len(model))
        F, G, Hs = (SymbolPrefix([random_poly(rng, 3, 2 * cap) for _ in range(cap + 1)]) for _ in range(3))
        rho = SymbolPrefix(rho_jets(model, base, cap, out_order=2 * cap).coeffs)
        ok &= star_product(model, base, rho, F, cap).agrees(F)
        ok &= star_product(model, base, F, rho, cap).agrees(F)
        lhs = star_product(model, base, star_product(model, base, F, G, cap), Hs, cap)
        rhs = star_product(model, base, F, star_product(model, base, G, Hs, cap), cap)
        ok &= lhs.agrees(rhs)
    assert criterion(4, "unit and associativity mod hbar^5", ok)


def test_criterion_05_multiplier_map(criterion):
    f = H.polarized_jet((0, 0), 8)
    vals = b_map("fs:0", (0, 0), SymbolPrefix.from_jet(f, 3), 3).values()
    # hbar (1 + hbar) / (1 + 2 hbar) from (k + 1) / (2 pi (k + 2)) = (k / 2 pi) sum tau_l k^-l
    geo = [(-2) ** i for i in range(4)]
    closed = [0] + [geo[ell - 1] + (geo[ell - 2] if ell >= 2 else 0) for ell in range(1, 4)]
    rng = random.Random(9)
    cap = 4
    F = SymbolPrefix([random_poly(rng, 2, 2 * cap + 2 - 2 * j) for j in range(cap + 1)])
    base = (mpq(1, 2), mpq(1, 3))
    rt = b_map("fs:0", base, b_inverse_map("fs:0", base, F, cap), cap).agrees(F)
    ok = vals == closed == [0, 1, -1, 2] and rt
    assert criterion(5, "B_l(h)(0) = 0, 1, -1, 2 and B B^-1 = id", ok, f"values {[str(v) for v in vals]}")


def test_criterion_06_fixed_order_products(criterion):
    t0 = time.perf_counter()
    slopes = [compare_product(H, H, N, range(8, 65)).slope for N in (0, 1, 2)]
    dt = time.perf_counter() - t0
    ok = all(abs(s + N + 1) <= 0.3 for N, s in enumerate(slopes)) and dt < 60
    assert criterion(6, "product slopes -(N+1) +- 0.3", ok, f"slopes {[round(s, 3) for s in slopes]}, {dt:.1f}s")


@pytest.mark.slow
def test_criterion_07_exponential_products(criterion):
    rep = compare_product(H, H, "auto", range(8, 65))
    fit = rep.rate
    ok = (fit.rate > 0 and fit.quality >= 0.9) or fit.all_floor_limited
    detail = (f"eps={rep.epsilon}, C={rep.C_fit:.3g}, rate={fit.rate:.4g}, R2={fit.quality:.4f}, "
              f"floor-limited k={fit.floor_limited[:1] + ['...'] if fit.floor_limited else 'none'}")
    assert criterion(7, "exponential product remainder", ok, detail)


def test_criterion_08_offdiagonal_decay(criterion):
    fit = offdiag_rate(0, 1, k_list=range(8, 65))
    target = 0.5 * math.log(2)
    rel = abs(fit.rate - target) / target
    assert criterion(8, "off-diagonal rate 1/2 log 2 within 1%", rel < 0.01, f"rate {fit.rate:.5f}, rel {rel:.2e}")


def test_criterion_09_richardson(criterion):
    worst = 0.0
    for sym in (ONE, H):
        jet = sym.polarized_jet((0, 0), 8)
        exact = b_map("fs:0", (0, 0), SymbolPrefix.from_jet(jet, 3), 3).values()
        est = covariant_from_oracle(sym, 3, range(40, 65, 2), z=0)
        worst = max(worst, max(abs(float(a) - float(b)) for a, b in zip(exact, est.values)))
    assert criterion(9, "Richardson matches b_map to 1e-6", worst < 1e-6, f"max diff {worst:.2e}")


def test_criterion_10_remainders_and_inversion(criterion):
    geo = [mpq(2) ** ell for ell in range(20)]
    g_rep = check_remainder_bound({k: 1 / (1 - mpq(2, k)) for k in range(5, 101)}, geo, 2)
    eps = mpq(1, 10)
    fact = [mpq((-2) ** ell * math.factorial(ell)) for ell in range(31)]
    u = {k: partial_sum(fact, eps, k) for k in range(1, 101)}
    C0 = fit_factorial_growth(fact)
    # the truncation error ~ exp(-eps k log(e / (C0 eps))) has to sit below min_N C^(N+1) N! k^-N ~ exp(-k/C)
    C = 1 / (float(eps) * math.log(math.e / (C0 * float(eps))))
    f_rep = check_remainder_bound(u, fact, C)
    rng = random.Random(1)
    cap = 8
    mats = [np.array([[mpq(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(3)] for _ in range(3)],
                     dtype=object) for _ in range(cap)]
    P = OperatorSeries([(lambda v, M=M: M.dot(v)) for M in mats])
    Q = invert_operator_series(P, cap)
    basis = [np.array([mpq(int(i == j)) for i in range(3)], dtype=object) for j in range(3)]
    Qm = [np.identity(3, dtype=object) * mpq(1)]
    Qm += [np.array([Q.apply(m, e) for e in basis], dtype=object).T for m in range(1, cap + 1)]
    inv_ok = True
    for m in range(1, cap + 1):
        # (id - sum P)(id + sum Q) and (id + sum Q)(id - sum P) at order m
        left = Qm[m] - sum(mats[i - 1].dot(Qm[m - i]) for i in range(1, m + 1))
        right = Qm[m] - sum(Qm[m - i].dot(mats[i - 1]) for i in range(1, m + 1))
        inv_ok &= not any(left.ravel()) and not any(right.ravel())
    counts = Q.composition_counts == [2 ** (m - 1) for m in range(1, cap + 1)]
    ok = g_rep.passed and f_rep.passed and inv_ok and counts
    detail = (f"geometric worst {g_rep.worst_ratio:.3f}; factorial C={C:.3f} worst {f_rep.worst_ratio:.3f}; "
              f"inverse {'exact' if inv_ok else 'FAILED'}; counts {'ok' if counts else 'wrong'}")
    assert criterion(10, "remainder bounds and series inversion", ok, detail)


def test_criterion_11_growth(criterion):
    model = "pflat:1/10"
    bases = [(0, 0), (mpq(1, 2), mpq(1, 3))]
    a_fit = fit_a_growth(model, bases, 10)
    _, rho_run = running_constants([abs(float(v)) for v in rho_jets(model, (0, 0), 10, out_order=0).values()], "power")
    tab = b_inverse_coefficients(model, (0, 0), 6)
    norms = [1.0] + [max(abs(float(v)) for v in row.values()) for row in tab.values()]
    _, binv_run = running_constants(norms, "factorial")
    ok = stable_after(a_fit.running()) and stable_after(rho_run) and stable_after(binv_run)
    detail = f"C_a={a_fit.C:.3g}, C_rho={rho_run[-1]:.3g}, C_Binv={binv_run[-1]:.3g}"
    assert criterion(11, "growth constants stabilize on pflat:1/10", ok, detail)


def test_criterion_11_info_fubini_study(criterion):
    # diagnostic only: the a-table fit on FS away from the origin is still rising at l = 10
    fit = fit_a_growth("fs:0", [(mpq(1, 2), mpq(1, 2))], 8)
    criterion("11-info", "fs:0 at (1/2,1/2) a-growth", True,
              f"info: running C {[round(c, 3) for c in fit.running()]}, stable={stable_after(fit.running())}")
