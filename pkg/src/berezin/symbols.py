"""Analytic-symbol toolkit: partial sums, growth fits, remainder bounds,
exponential-rate fits, operator-series inversion and seminorm estimates.

Two growth normalizations are exposed and never converted silently:
factorial (``|a_l| <= C^(l+1) l!``) and power (``|a_l| <= C^(l+1) l^l``).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from gmpy2 import mpq

from .errors import PreconditionError
from .scalars import is_exact, magnitude

__all__ = [
    "NormedSymbol",
    "OperatorSeries",
    "SeminormEstimate",
    "RateFit",
    "RemainderReport",
    "floor_index",
    "partial_sum",
    "fit_factorial_growth",
    "fit_power_growth",
    "running_constants",
    "check_remainder_bound",
    "fit_exponential_rate",
    "invert_operator_series",
    "compositions",
    "seminorm_lower_bound",
    "cauchy_upper_bound",
    "sup_norm",
    "default_epsilon",
]

MACHINE_EPS = float(np.finfo(float).eps)


def _norm(c) -> float:
    if hasattr(c, "max_abs"):
        return c.max_abs()
    return magnitude(c)


@dataclass
class NormedSymbol:
    """Prefix ``a_0..a_N`` with a norm per coefficient.

    Scalars are normed by absolute value; jets by their maximum coefficient
    magnitude.  ``C`` is an optional declared factorial-growth constant.
    """

    coeffs: list
    C: float | None = None

    def __post_init__(self):
        self.coeffs = list(self.coeffs)
        if self.C is not None:
            for ell, a in enumerate(self.coeffs):
                if _norm(a) > self.C ** (ell + 1) * math.factorial(ell) * (1 + 1e-12):
                    raise PreconditionError(f"declared C={self.C} violated at l={ell}")

    @property
    def norms(self) -> list:
        return [_norm(a) for a in self.coeffs]

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]


def _coeff_list(a):
    if isinstance(a, NormedSymbol):
        return a.coeffs
    if hasattr(a, "coeffs") and not isinstance(a, (list, tuple)):
        return list(a.coeffs)
    return list(a)


def floor_index(eps, k: int) -> int:
    """``floor(eps * k)``, exact for rational ``eps``."""
    if isinstance(eps, str):
        eps = Fraction(eps)
    elif isinstance(eps, float):
        # decimal literals like 0.1 should floor as 1/10 would
        eps = Fraction(repr(eps))
    else:
        eps = Fraction(int(mpq(eps).numerator), int(mpq(eps).denominator))
    return math.floor(eps * k)


def partial_sum(a, eps, k: int):
    """``a(eps, k) = sum_{l <= floor(eps k)} a_l k^-l`` in the coefficient arithmetic.

    Raises
    ------
    PreconditionError
        If the stored prefix is shorter than ``floor(eps k) + 1``.
    """
    coeffs = _coeff_list(a)
    N = floor_index(eps, k)
    if N >= len(coeffs):
        raise PreconditionError(f"prefix has {len(coeffs)} terms, partial sum needs {N + 1}")
    exact = all(is_exact(c) for c in coeffs if not hasattr(c, "max_abs"))
    kk = mpq(k) if exact else float(k)
    total = coeffs[0]
    for ell in range(1, N + 1):
        total = total + coeffs[ell] * (1 / kk ** ell)
    return total


def fit_factorial_growth(a) -> float:
    """``C = max_l (|a_l| / l!)^(1/(l+1))``."""
    norms = NormedSymbol(_coeff_list(a)).norms
    if not norms:
        raise PreconditionError("empty prefix")
    return max((n / math.factorial(ell)) ** (1.0 / (ell + 1)) for ell, n in enumerate(norms))


def _pow_norm(ell):
    return 1.0 if ell == 0 else float(ell) ** ell


def fit_power_growth(a) -> float:
    """``C = max_l (|a_l| / l^l)^(1/(l+1))`` with ``0^0 = 1``."""
    norms = NormedSymbol(_coeff_list(a)).norms
    if not norms:
        raise PreconditionError("empty prefix")
    return max((n / _pow_norm(ell)) ** (1.0 / (ell + 1)) for ell, n in enumerate(norms))


def running_constants(norms, kind="factorial") -> tuple:
    """Per-level constants and their running maximum.

    Returns
    -------
    per_level, running : list of float
        ``(|a_l| / w_l)^(1/(l+1))`` with ``w_l = l!`` or ``l^l``, and the
        cumulative maximum (the fitted C using levels ``<= l``).
    """
    w = math.factorial if kind == "factorial" else _pow_norm
    per = [(float(n) / w(ell)) ** (1.0 / (ell + 1)) for ell, n in enumerate(norms)]
    run, best = [], 0.0
    for c in per:
        best = max(best, c)
        run.append(best)
    return per, run


def default_epsilon(C_fit: float) -> float:
    """Default truncation ratio ``eps = 1 / (2 C)``."""
    if C_fit <= 0:
        raise PreconditionError("growth constant must be positive")
    return 1.0 / (2.0 * C_fit)


@dataclass
class RemainderReport:
    """Outcome of :func:`check_remainder_bound`."""

    passed: bool
    worst_ratio: float
    worst_at: tuple
    C: float
    rows: list = field(default_factory=list)
    coefficient_ok: bool = True


def _as_float(x) -> float:
    if hasattr(x, "max_abs"):
        raise TypeError("remainder checks need scalar values")
    return float(x.real) if isinstance(x, complex) else float(x)


def check_remainder_bound(u, a, C, Ns=None) -> RemainderReport:
    """Check ``|u(k) - sum_{l<N} a_l k^-l| <= C^(N+1) k^-N N!`` on a k-grid.

    Parameters
    ----------
    u : dict or callable
        ``k -> value`` sampled on integers.
    a : sequence or NormedSymbol
        Coefficients ``a_0, a_1, ...``.
    C : float
    Ns : iterable of int, optional
        Tested truncation orders (default: all ``N <= len(a) - 1``).

    Returns
    -------
    RemainderReport
        ``passed`` covers the remainder bounds and the coefficient bounds
        ``|a_N| <= C^(N+1) N!`` for every stored ``N``.
    """
    coeffs = _coeff_list(a)
    if isinstance(u, dict):
        ks = sorted(u)
        vals = dict(u)
    else:
        raise TypeError("u must be a dict k -> value")
    Ns = list(range(len(coeffs))) if Ns is None else list(Ns)
    if max(Ns) > len(coeffs):
        raise PreconditionError("prefix too short for the tested N")
    worst, where, rows = 0.0, None, []
    for N in Ns:
        for k in ks:
            s = 0
            exact = all(is_exact(c) for c in coeffs[:N]) and is_exact(vals[k])
            kk = mpq(k) if exact else float(k)
            for ell in range(N):
                s = s + coeffs[ell] / kk ** ell
            rem = abs(_as_float(vals[k] - s)) if exact else abs(float(vals[k]) - float(s))
            bound = math.exp((N + 1) * math.log(C) - N * math.log(k) + math.lgamma(N + 1))
            ratio = rem / bound
            rows.append((N, k, rem, bound))
            if ratio > worst:
                worst, where = ratio, (N, k)
    coef_ok = all(_norm(c) <= C ** (N + 1) * math.factorial(N) * (1 + 1e-12) for N, c in enumerate(coeffs))
    return RemainderReport(worst <= 1.0 and coef_ok, worst, where, C, rows, coef_ok)


@dataclass
class RateFit:
    """Least-squares fit ``log r(k) = c - rate * k``.

    ``rate`` estimates ``1/C`` in ``O(exp(-k/C))``; ``quality`` is R^2 on
    the retained samples.  Samples below ``10 * eps`` are excluded and listed
    in ``floor_limited``.
    """

    rate: float
    quality: float
    used: list
    floor_limited: list
    flag: str = ""

    @property
    def all_floor_limited(self) -> bool:
        return not self.used and bool(self.floor_limited)


def fit_exponential_rate(residuals, eps=MACHINE_EPS, floor=None) -> RateFit:
    """Fit an exponential decay rate to positive k-indexed residuals.

    Parameters
    ----------
    residuals : dict
        ``k -> residual`` with at least 4 samples.
    eps : float
        Arithmetic epsilon; samples below ``10 * eps`` (or ``floor``) are
        floor-limited.

    Returns
    -------
    RateFit
        ``flag`` is ``"floor"`` when all samples are floor-limited,
        ``"flat"`` when the data show no decay (R^2 undefined or ~0).
    """
    if len(residuals) < 4:
        raise PreconditionError("need at least 4 samples to fit a rate")
    limit = 10 * eps if floor is None else floor
    used, low = [], []
    for k in sorted(residuals):
        r = float(residuals[k])
        (used if r > limit else low).append((k, r))
    if len(used) < 2:
        return RateFit(float("nan"), float("nan"), [], [k for k, _ in low] + [k for k, _ in used], "floor")
    ks = np.array([k for k, _ in used], dtype=float)
    ys = np.log(np.array([r for _, r in used]))
    A = np.vstack([np.ones_like(ks), ks]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    pred = A @ coef
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    ss_res = float(np.sum((ys - pred) ** 2))
    rate = float(-coef[1])
    scale = max(1.0, float(np.max(np.abs(ys))))
    if ss_tot <= (1e-24 * scale) * len(ys):
        return RateFit(0.0 if abs(rate) < 1e-12 else rate, 0.0, [k for k, _ in used], [k for k, _ in low], "flat")
    quality = 1.0 - ss_res / ss_tot
    flag = "flat" if quality < 0.5 and abs(rate) < 1e-3 else ""
    return RateFit(rate, quality, [k for k, _ in used], [k for k, _ in low], flag)


# -- operator series --------------------------------------------------------

def compositions(m: int):
    """All compositions of ``m`` (ordered tuples of positive parts)."""
    if m == 0:
        yield ()
        return
    for first in range(1, m + 1):
        for rest in compositions(m - first):
            yield (first,) + rest


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


@dataclass
class OperatorSeries:
    """Formal series ``sum_{l >= 1} hbar^l P_l`` of linear actions.

    Parameters
    ----------
    terms : list of callable or None
        ``terms[l - 1]`` is ``P_l``; ``None`` means zero.
    seminorms : list of float, optional
        Metadata ``||P_l||_l`` when known.
    """

    terms: list
    seminorms: list = field(default_factory=list)
    composition_counts: list = field(default_factory=list)

    @property
    def cap(self) -> int:
        return len(self.terms)

    def term(self, ell: int):
        if 1 <= ell <= len(self.terms):
            return self.terms[ell - 1]
        return None

    def apply(self, ell: int, f, zero=None):
        P = self.term(ell)
        if P is None:
            return zero
        return P(f)


def invert_operator_series(P: OperatorSeries, cap: int, method="recursion", zero=None) -> OperatorSeries:
    """Inverse of ``id - sum hbar^l P_l`` as ``id + sum hbar^m Q_m``.

    ``Q_m = sum_{i_1 + ... + i_r = m} P_{i_1} ... P_{i_r}``; the number of
    compositions is ``2^(m-1)``.  ``method="recursion"`` evaluates the same
    sum through ``Q_m = sum_i P_i Q_{m-i}`` (identical results, linear
    cost); ``"compositions"`` expands it term by term.

    Raises
    ------
    PreconditionError
        If ``cap > 10``.
    """
    if cap > 10:
        raise PreconditionError("operator-series inversion is limited to cap <= 10")
    counts = [sum(1 for _ in compositions(m)) for m in range(1, cap + 1)]

    def make(m):
        if method == "compositions":
            def Q(f):
                acc = zero
                for comp in compositions(m):
                    g = f
                    for i in reversed(comp):
                        Pi = P.term(i)
                        if Pi is None:
                            g = None
                            break
                        g = Pi(g)
                    if g is not None:
                        acc = _add(acc, g)
                return acc
            return Q

        def Q(f):
            memo = {0: f}
            for r in range(1, m + 1):
                acc = zero
                for i in range(1, r + 1):
                    Pi = P.term(i)
                    prev = memo[r - i]
                    if Pi is None or prev is None:
                        continue
                    acc = _add(acc, Pi(prev))
                memo[r] = acc
            return memo[m]
        return Q

    return OperatorSeries([make(m) for m in range(1, cap + 1)], composition_counts=counts)


# -- seminorms ---------------------------------------------------------------

GRID = 64


def sup_norm(poly: dict, r: float, n: int, grid: int = GRID) -> float:
    """Sampled sup of ``|f|`` on the torus of radius ``r`` (a lower bound).

    ``poly`` maps exponent tuples to scalars.
    """
    if not poly:
        return 0.0
    angles = np.exp(2j * np.pi * np.arange(grid) / grid)
    if n == 1:
        z = r * angles
        vals = np.zeros(grid, dtype=complex)
        for (e,), c in poly.items():
            vals += complex(c) * z ** e
        return float(np.max(np.abs(vals)))
    mesh = np.meshgrid(*([r * angles] * n), indexing="ij")
    vals = np.zeros(mesh[0].shape, dtype=complex)
    for e, c in poly.items():
        term = complex(c)
        for zi, ei in zip(mesh, e):
            term = term * zi ** ei
        vals = vals + term
    return float(np.max(np.abs(vals)))


def _majorant(poly: dict, r: float) -> float:
    """``sum |c| r^|e|``, an upper bound for the sup on the polydisc."""
    return float(sum(abs(complex(c)) * r ** sum(e) for e, c in poly.items()))


@dataclass
class SeminormEstimate:
    """Certified lower bound for ``||P||_{t,s}`` plus an upper bound when known."""

    operator: str
    t: float
    s: float
    deg_cap: int
    lower: float
    witness: str
    upper: float | None = None

    def __post_init__(self):
        if not self.t > self.s > 0:
            raise PreconditionError("seminorm radii need t > s > 0")


def _random_corpus(n, deg_cap, count=24, seed=20240611):
    rng = random.Random(seed)
    corpus = []
    for idx in range(count):
        terms = {}
        for _ in range(rng.randint(2, 6)):
            e = [0] * n
            for _ in range(rng.randint(0, deg_cap)):
                e[rng.randrange(n)] += 1
            terms[tuple(e)] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        terms = {k: v for k, v in terms.items() if v}
        if terms:
            corpus.append((f"random#{idx}", terms))
    return corpus


def seminorm_lower_bound(op: Callable, t, s, deg_cap: int, n: int = 1, name: str = "op",
                         upper: float | None = None) -> SeminormEstimate:
    """Lower bound for ``||op||_{t,s} = sup ||op f||_s / ||f||_t``.

    The search runs over normalized monomials of degree ``<= deg_cap`` and a
    fixed corpus of random polynomials.  ``||op f||_s`` is sampled on a
    64-point circle grid per dimension (a lower bound) and ``||f||_t`` is
    replaced by the majorant ``sum |c| t^|e|`` (an upper bound), so every
    ratio is a certified lower bound.  Ties go to the lexicographically
    smallest descriptor.

    Parameters
    ----------
    op : callable
        Maps a polynomial ``{exponent tuple: coeff}`` to another.
    """
    t, s = float(t), float(s)
    if not t > s > 0:
        raise PreconditionError("seminorm radii need t > s > 0")
    cands = []
    for total in range(deg_cap + 1):
        for e in np.ndindex(*([total + 1] * n)):
            if sum(e) == total:
                cands.append(("u^" + ",".join(map(str, e)), {tuple(int(x) for x in e): Fraction(1)}))
    cands += _random_corpus(n, deg_cap)
    best, wit = 0.0, ""
    for desc, f in cands:
        den = _majorant(f, t)
        if den == 0:
            continue
        val = sup_norm(op(f), s, n) / den
        if val > best * (1 + 1e-12) or (abs(val - best) <= 1e-12 * max(best, 1e-300) and desc < wit):
            best, wit = val, desc
    return SeminormEstimate(name, t, s, deg_cap, best, wit, upper)


def cauchy_upper_bound(gamma, t, s, C: float = 1.0) -> float:
    """Cauchy bound ``C^(|gamma|+1) gamma! / (t - s)^|gamma|`` for ``d^gamma``.

    ``C = 1`` is valid on polydiscs.
    """
    gamma = tuple(gamma)
    g = sum(gamma)
    fact = 1
    for x in gamma:
        fact *= math.factorial(x)
    return C ** (g + 1) * fact / (float(t) - float(s)) ** g


def derivative_op(gamma):
    """``d^gamma`` acting on ``{exponent tuple: coeff}`` polynomials."""
    gamma = tuple(gamma)

    def op(f):
        out = {}
        for e, c in f.items():
            if all(x >= g for x, g in zip(e, gamma)):
                mult = 1
                for x, g in zip(e, gamma):
                    for j in range(g):
                        mult *= x - j
                k = tuple(x - g for x, g in zip(e, gamma))
                out[k] = out.get(k, 0) + c * mult
        return {k: v for k, v in out.items() if v != 0}
    return op


__all__ += ["derivative_op"]
