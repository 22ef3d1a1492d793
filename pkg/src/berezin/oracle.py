"""Exact finite-k quantization on CP^1 (sections of O(k + m)).

Monomials ``z^j``, ``j = 0..N`` with ``N = k + m``, span the quantum space
with ``||z^j||^2 = 2 pi j! (N - j)! / (N + 1)!`` (the reference measure
carries the factor 2 that makes the flat Bergman value ``k / 2 pi``).
Toeplitz matrices of closed-form symbols ``sum c z^a conj(z)^b (1+|z|^2)^-d``
are exact Beta-integral ratios.

Norms and entries are exact rationals; linear algebra runs in double
precision on matrices of size ``<= 256``.
"""
from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .errors import InadmissibleBaseError, PreconditionError
from .geometry import log_e_norm, parse_model
from .jets import Jet, VariableLayout, jet_mul, jet_pow
from .scalars import QQi, format_scalar, is_exact, parse_scalar, to_complex
from .symbols import (default_epsilon, fit_exponential_rate, fit_factorial_growth, floor_index)

__all__ = [
    "Cp1Space", "OracleSymbol", "ToeplitzMatrix", "cp1_norms", "toeplitz_matrix",
    "toeplitz_radial_quadrature", "bergman_kernel_eval", "bergman_kernel_sum", "diagonal_symbol",
    "operator_norm", "kernel_sup_norm", "star_coefficients", "compare_product",
    "covariant_from_oracle", "offdiag_rate", "MAX_DIM",
]

MAX_DIM = 256


def _beta(p: int, q: int) -> mpq:
    """``B(p, q)`` for positive integers."""
    return mpq(math.factorial(p - 1) * math.factorial(q - 1), math.factorial(p + q - 1))


@dataclass(frozen=True)
class Cp1Space:
    """Sections of ``O(k + m)`` with the monomial basis."""

    k: int
    m: int = 0

    def __post_init__(self):
        if self.k < 0 or self.m < 0:
            raise PreconditionError("k and m must be non-negative")
        if self.dim > MAX_DIM:
            raise PreconditionError(f"dimension {self.dim} exceeds the oracle cap {MAX_DIM}")

    @property
    def N(self) -> int:
        return self.k + self.m

    @property
    def dim(self) -> int:
        return self.N + 1

    def norm_ratios(self) -> list:
        """``||z^j||^2 / 2 pi`` as exact rationals."""
        N = self.N
        return [_beta(j + 1, N - j + 1) for j in range(N + 1)]

    def norms(self) -> np.ndarray:
        return 2 * np.pi * np.array([float(r) for r in self.norm_ratios()])


def cp1_norms(k: int, m: int = 0) -> list:
    """Squared norms as ``(ratio, "2pi")`` pairs: ``||z^j||^2 = 2 pi * ratio``.

    Examples
    --------
    >>> [str(r) for r in cp1_norms(2)]
    ['1/3', '1/6', '1/3']
    """
    return Cp1Space(k, m).norm_ratios()


def _exact_coeff(c):
    if isinstance(c, (QQi,)) or is_exact(c):
        return c
    if isinstance(c, str):
        return parse_scalar(c)
    if isinstance(c, Fraction):
        return mpq(c.numerator, c.denominator)
    if isinstance(c, int):
        return mpq(c)
    return complex(c)


_TERM = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*,\s*(-?\d+)\s*(?::\s*(.+?))?\s*$")


@dataclass(frozen=True)
class OracleSymbol:
    """``sum c z^a conj(z)^b (1 + |z|^2)^-d`` with ``d >= max(a, b)``.

    ``terms`` holds ``(a, b, d, c)`` tuples.  Named symbols: ``"1"`` and
    ``"h"`` (``|z|^2 / (1 + |z|^2)``, also ``"x"``).
    """

    terms: tuple
    name: str = ""

    def __post_init__(self):
        clean = []
        for t in self.terms:
            a, b, d, c = t
            if a < 0 or b < 0 or d < max(a, b):
                raise PreconditionError(f"symbol term {(a, b, d)} violates d >= max(a, b)")
            c = _exact_coeff(c)
            if c != 0:
                clean.append((int(a), int(b), int(d), c))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def parse(cls, text: str) -> "OracleSymbol":
        """Parse ``"1"``, ``"h"``, ``"x"`` or ``"a,b,d[:coeff]"`` terms joined by ``;``."""
        text = text.strip()
        if text == "1":
            return cls(((0, 0, 0, 1),), "1")
        if text in ("h", "x"):
            return cls(((1, 1, 1, 1),), text)
        terms = []
        for part in text.split(";"):
            mt = _TERM.match(part)
            if not mt:
                raise ValueError(f"bad symbol term {part!r}; expected a,b,d[:coeff]")
            c = parse_scalar(mt.group(4)) if mt.group(4) else mpq(1)
            terms.append((int(mt.group(1)), int(mt.group(2)), int(mt.group(3)), c))
        return cls(tuple(terms), text)

    @classmethod
    def x_polynomial(cls, coeffs, name="") -> "OracleSymbol":
        """``sum_j c_j x^j`` with ``x = |z|^2 / (1 + |z|^2)``."""
        return cls(tuple((j, j, j, c) for j, c in enumerate(coeffs) if c != 0), name)

    @property
    def is_radial(self) -> bool:
        return all(a == b for a, b, _, _ in self.terms)

    @property
    def is_exact(self) -> bool:
        return all(not isinstance(c, complex) for *_, c in self.terms)

    def conj(self) -> "OracleSymbol":
        return OracleSymbol(tuple((b, a, d, c.conjugate() if hasattr(c, "conjugate") else c)
                                  for a, b, d, c in self.terms), self.name + "*")

    def __mul__(self, other: "OracleSymbol") -> "OracleSymbol":
        out = {}
        for a1, b1, d1, c1 in self.terms:
            for a2, b2, d2, c2 in other.terms:
                key = (a1 + a2, b1 + b2, d1 + d2)
                out[key] = out.get(key, 0) + c1 * c2
        return OracleSymbol(tuple(k + (v,) for k, v in sorted(out.items())))

    def __add__(self, other: "OracleSymbol") -> "OracleSymbol":
        return OracleSymbol(self.terms + other.terms)

    def evaluate(self, z) -> complex:
        z = complex(z)
        t = abs(z) ** 2
        return sum(to_complex(c) * z ** a * z.conjugate() ** b * (1 + t) ** (-d) for a, b, d, c in self.terms)

    def x_coefficients(self) -> list:
        """Coefficients in ``x`` of a radial symbol (``t^a (1+t)^-d = x^a (1-x)^(d-a)``)."""
        if not self.is_radial:
            raise PreconditionError("x-expansion needs a radial symbol")
        deg = max((d for _, _, d, _ in self.terms), default=0)
        out = [mpq(0)] * (deg + 1)
        for a, _, d, c in self.terms:
            for i in range(d - a + 1):
                out[a + i] = out[a + i] + c * math.comb(d - a, i) * (-1) ** i
        return out

    def polarized_jet(self, base, order: int) -> Jet:
        """Jet at ``(x0, y0)`` of ``sum c x^a y^b (1 + x y)^-d``."""
        lay = VariableLayout(1, ("x", "y_c"))
        x0, y0 = base
        x, y = Jet.variable(lay, "x", order), Jet.variable(lay, "y_c", order)
        if not (is_exact(x0) and is_exact(y0)):
            x, y = x.to_float(), y.to_float()
        x, y = x + x0, y + y0
        one_xy = jet_mul(x, y, order) + 1
        acc = Jet.zero(lay, order, mode=x.mode)
        for a, b, d, c in self.terms:
            term = jet_mul(jet_mul(jet_pow(x, a, order), jet_pow(y, b, order), order),
                           jet_pow(one_xy, -d, order), order)
            acc = acc + term.scale(c)
        return acc.truncate(order)

    def __str__(self):
        if self.name:
            return self.name
        return ";".join(f"{a},{b},{d}:{format_scalar(c)}" for a, b, d, c in self.terms)


@dataclass
class ToeplitzMatrix:
    """``T_k(f)`` in the monomial basis: ``entries[(j, i)] = <f z^i, z^j> / ||z^j||^2``."""

    k: int
    m: int
    entries: dict
    symbol: str = ""

    @property
    def dim(self) -> int:
        return self.k + self.m + 1

    @property
    def dense(self) -> np.ndarray:
        A = np.zeros((self.dim, self.dim), dtype=complex)
        for (j, i), v in self.entries.items():
            A[j, i] = to_complex(v)
        return A

    def exact_dense(self) -> list:
        A = [[mpq(0)] * self.dim for _ in range(self.dim)]
        for (j, i), v in self.entries.items():
            A[j][i] = v
        return A

    def __add__(self, other):
        out = dict(self.entries)
        for key, v in other.entries.items():
            out[key] = out.get(key, 0) + v
        return ToeplitzMatrix(self.k, self.m, {k: v for k, v in out.items() if v != 0})

    def scale(self, c):
        return ToeplitzMatrix(self.k, self.m, {k: v * c for k, v in self.entries.items() if v * c != 0})

    def __sub__(self, other):
        return self + other.scale(-1)

    def __matmul__(self, other):
        rows = {}
        for (j, i), v in other.entries.items():
            rows.setdefault(j, []).append((i, v))
        out = {}
        for (r, j), v in self.entries.items():
            for i, w in rows.get(j, ()):
                out[(r, i)] = out.get((r, i), 0) + v * w
        return ToeplitzMatrix(self.k, self.m, {k: v for k, v in out.items() if v != 0})

    def diagonal(self) -> list:
        return [self.entries.get((j, j), mpq(0)) for j in range(self.dim)]


def toeplitz_matrix(f: OracleSymbol, k: int, m: int = 0) -> ToeplitzMatrix:
    """Exact Toeplitz matrix of a closed-form symbol.

    Term ``(a, b, d, c)`` maps ``z^i`` to ``z^j`` with ``j = i + a - b`` and
    coefficient ``c B(a + i + 1, N + d + 1 - a - i) / B(j + 1, N + 1 - j)``.

    Examples
    --------
    >>> [str(v) for v in toeplitz_matrix(OracleSymbol.parse("h"), 2).diagonal()]
    ['1/4', '1/2', '3/4']
    """
    if isinstance(f, str):
        f = OracleSymbol.parse(f)
    sp = Cp1Space(k, m)
    N = sp.N
    ratios = sp.norm_ratios()
    out = {}
    for a, b, d, c in f.terms:
        for i in range(N + 1):
            j = i + a - b
            if not 0 <= j <= N:
                continue
            v = c * (_beta(a + i + 1, N + d + 1 - a - i) / ratios[j])
            out[(j, i)] = out.get((j, i), 0) + v
    return ToeplitzMatrix(k, m, {key: v for key, v in out.items() if v != 0}, str(f))


def toeplitz_radial_quadrature(func, k: int, m: int = 0, nodes: int = 64, check=True):
    """Diagonal ``T_k(f)`` for a radial ``f`` given pointwise as ``func(x)``.

    ``x = |z|^2 / (1 + |z|^2)`` turns each entry into
    ``int_0^1 f x^j (1-x)^(N-j) dx / B(j+1, N-j+1)``, evaluated by
    Gauss-Jacobi quadrature with ``nodes`` points.

    Returns
    -------
    diag : ndarray
    converged : bool
        Agreement with a ``nodes - 16`` point rule to ``1e-12`` relative.
    """
    from scipy.special import roots_jacobi

    N = k + m
    if N + 1 > MAX_DIM:
        raise PreconditionError(f"dimension {N + 1} exceeds the oracle cap {MAX_DIM}")

    def rule(n):
        diag = np.zeros(N + 1)
        for j in range(N + 1):
            s, w = roots_jacobi(n, N - j, j)
            x = (1 + s) / 2
            vals = np.array([func(float(xi)) for xi in x])
            lognorm = (math.lgamma(j + 1) + math.lgamma(N - j + 1) - math.lgamma(N + 2))
            diag[j] = float(np.dot(w, vals)) * 2.0 ** (-(N + 1)) / math.exp(lognorm)
        return diag

    d = rule(nodes)
    if not check:
        return d, True
    d2 = rule(max(nodes - 16, 8))
    scale = max(1.0, float(np.max(np.abs(d))))
    return d, bool(np.max(np.abs(d - d2)) <= 1e-12 * scale)


# -- kernels -------------------------------------------------------------------

def bergman_kernel_eval(k: int, m: int, z, w) -> float:
    """``|Pi_k(z, conj w)|`` in the metric frame (closed form).

    Examples
    --------
    >>> round(bergman_kernel_eval(1, 0, 0, 1), 4)
    0.2251
    """
    N = k + m
    z, w = complex(z), complex(w)
    return ((N + 1) / (2 * math.pi) * abs(1 + z * w.conjugate()) ** N
            * (1 + abs(z) ** 2) ** (-N / 2) * (1 + abs(w) ** 2) ** (-N / 2))


def bergman_kernel_sum(k: int, m: int, z, w) -> complex:
    """``Pi_k(z, conj w)`` from the orthonormal basis, metric-frame normalized."""
    sp = Cp1Space(k, m)
    N = sp.N
    z, w = complex(z), complex(w)
    ratios = sp.norm_ratios()
    s = sum((z * w.conjugate()) ** j / (2 * math.pi * float(ratios[j])) for j in range(N + 1))
    return s * (1 + abs(z) ** 2) ** (-N / 2) * (1 + abs(w) ** 2) ** (-N / 2)


def diagonal_symbol(T: ToeplitzMatrix, z):
    """``(2 pi / k) K_T(z, z)`` in the metric frame; exact for rational ``z``.

    ``K_T(z, w) = sum_ij T[j, i] z^j conj(w)^i / ||z^i||^2``.
    """
    sp = Cp1Space(T.k, T.m)
    N = sp.N
    ratios = sp.norm_ratios()
    exact = is_exact(z) or isinstance(z, QQi) or isinstance(z, int)
    if exact and all(is_exact(v) or isinstance(v, QQi) for v in T.entries.values()):
        z = z if isinstance(z, QQi) else mpq(z)
        zb = z.conjugate() if isinstance(z, QQi) else z
        t = z * zb
        zp = [mpq(1)]
        zbp = [mpq(1)]
        for _ in range(N):
            zp.append(zp[-1] * z)
            zbp.append(zbp[-1] * zb)
        s = 0
        for (j, i), v in T.entries.items():
            s = s + v * zp[j] * zbp[i] / ratios[i]
        val = s / (1 + t) ** N / T.k
        if isinstance(val, QQi) and val.im == 0:
            val = val.re
        return val
    z = complex(z)
    s = sum(to_complex(v) * z ** j * z.conjugate() ** i / float(ratios[i]) for (j, i), v in T.entries.items())
    return s / (1 + abs(z) ** 2) ** N / T.k


# -- norms ---------------------------------------------------------------------

def operator_norm(A, tol=1e-12, max_sweeps=60) -> float:
    """Largest singular value by one-sided Jacobi iteration.

    Columns are orthogonalized pairwise until every off-diagonal cosine is
    below ``tol``.
    """
    U = np.array(A, dtype=complex)
    if U.size == 0:
        return 0.0
    n = U.shape[1]
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = U[:, p], U[:, q]
                alpha = float(np.real(np.vdot(up, up)))
                beta = float(np.real(np.vdot(uq, uq)))
                gamma = np.vdot(up, uq)
                g = abs(gamma)
                if g == 0 or g <= tol * math.sqrt(alpha * beta):
                    continue
                off = max(off, g / math.sqrt(alpha * beta))
                # rotate the phase of column q so the pair has a real overlap
                uq = uq * np.conj(gamma / g)
                zeta = (beta - alpha) / (2 * g)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + math.sqrt(1 + zeta * zeta))
                c = 1 / math.sqrt(1 + t * t)
                s = c * t
                U[:, p], U[:, q] = c * up - s * uq, s * up + c * uq
        if off <= tol:
            break
    return float(np.max(np.linalg.norm(U, axis=0)))


def kernel_sup_norm(T: ToeplitzMatrix, grid: int = 33) -> float:
    """Sampled sup of ``|K_T(z, z)|`` (metric frame) over a polar grid.

    The grid covers ``x = |z|^2 / (1 + |z|^2)`` uniformly in ``[0, 1)`` and
    8 angles; reported next to the operator norm.
    """
    best = 0.0
    for r_i in range(grid):
        x = r_i / grid
        r = math.sqrt(x / (1 - x))
        for a in range(8):
            z = r * cmath.exp(2j * math.pi * a / 8)
            best = max(best, abs(complex(diagonal_symbol(_float_copy(T), z))) * T.k / (2 * math.pi))
    return best


def _float_copy(T: ToeplitzMatrix) -> ToeplitzMatrix:
    return ToeplitzMatrix(T.k, T.m, {k: to_complex(v) for k, v in T.entries.items()})


# -- star coefficients from the symbol calculus -----------------------------------

def _x_series_from_w(cw: list) -> list:
    """Coefficients of ``P`` with ``P(w / (1 + w)) = H(w) = sum cw[i] w^i``.

    ``w = x / (1 - x)``; the composition is truncated to ``len(cw)`` terms.
    """
    M = len(cw) - 1
    # powers of x/(1-x) = sum_{r>=1} x^r
    out = [mpq(0)] * (M + 1)
    power = [mpq(1)] + [mpq(0)] * M
    for i in range(M + 1):
        if i:
            new = [mpq(0)] * (M + 1)
            for a, pa in enumerate(power):
                if pa == 0:
                    continue
                for r in range(1, M + 1 - a):
                    new[a + r] += pa
            power = new
        for e in range(M + 1):
            out[e] += cw[i] * power[e]
    return out


@dataclass
class StarCoefficients:
    """``h_0..h_L`` of the contravariant product on FS(m), as x-polynomials."""

    f: OracleSymbol
    g: OracleSymbol
    m: int
    symbols: list
    jets: list
    degree: int
    verified_to: int


def star_coefficients(f: OracleSymbol, g: OracleSymbol, L: int, m: int = 0, extra: int = 2):
    """Contravariant product coefficients ``h = B^-1(B f * B g)`` on FS(m).

    Each ``h_l`` is computed as a jet at the origin by the symbol calculus
    and reconstructed as a polynomial in ``x`` of degree at most
    ``deg f + deg g``; the next ``extra`` coefficients must vanish.

    Raises
    ------
    PreconditionError
        If ``f`` or ``g`` is not radial, or reconstruction fails.
    """
    from .contravariant import b_inverse_map, b_map
    from .starproduct import SymbolPrefix, star_product

    if not (f.is_radial and g.is_radial):
        raise PreconditionError("star coefficients on CP^1 are reconstructed for radial symbols only")
    deg = len(f.x_coefficients()) - 1 + len(g.x_coefficients()) - 1
    M = deg + extra
    D0 = 2 * M + 2 * L
    model = parse_model(f"fs:{m}")
    base = (mpq(0), mpq(0))
    FJ = SymbolPrefix.from_jet(f.polarized_jet(base, D0), L)
    GJ = SymbolPrefix.from_jet(g.polarized_jet(base, D0), L)
    BF = b_map(model, base, FJ, L)
    BG = b_map(model, base, GJ, L)
    P = star_product(model, base, BF, BG, L)
    H = b_inverse_map(model, base, P, L)
    syms, jets = [], []
    for ell, jet in enumerate(H.coeffs):
        if jet.cap < 2 * M:
            raise PreconditionError(f"h_{ell} known only to order {jet.cap} < {2 * M}")
        cw = []
        for (a, b), c in jet.items():
            if a != b and c != 0 and a + b <= 2 * M:
                raise PreconditionError(f"h_{ell} is not radial")
        for i in range(M + 1):
            cw.append(jet[(i, i)])
        px = _x_series_from_w(cw)
        if any(c != 0 for c in px[deg + 1:]):
            raise PreconditionError(f"h_{ell} is not a polynomial of degree <= {deg} in x")
        syms.append(OracleSymbol.x_polynomial(px[:deg + 1], f"h_{ell}"))
        jets.append(jet)
    return StarCoefficients(f, g, m, syms, jets, deg, M)


@dataclass
class ProductReport:
    """Residual table of ``T(f) T(g) - sum_{l <= N} k^-l T(h_l)``."""

    rows: list = field(default_factory=list)   # (k, N, opnorm, kernel_sup)
    slope: float | None = None
    rate: object = None
    epsilon: object = None
    C_fit: float | None = None
    quadrature_ok: bool = True

    def slopes_so_far(self) -> list:
        out = []
        for i in range(len(self.rows)):
            pts = [(math.log(r[0]), math.log(r[2])) for r in self.rows[:i + 1] if r[2] > 0]
            if len(pts) < 2:
                out.append(None)
                continue
            xs, ys = zip(*pts)
            out.append(float(np.polyfit(xs, ys, 1)[0]))
        return out


def _x_poly_sup(coeffs) -> float:
    xs = np.linspace(0, 1, 201)
    vals = sum(float(c) * xs ** j for j, c in enumerate(coeffs))
    return float(np.max(np.abs(vals)))


def compare_product(f, g, N="auto", k_list=range(8, 65), m: int = 0, star=None,
                    method="closed", kernel_norm=False) -> ProductReport:
    """Oracle residuals of the product expansion.

    Parameters
    ----------
    f, g : OracleSymbol or str
    N : int or "auto"
        Fixed truncation order, or ``"auto"`` for ``N = floor(eps k)`` with
        ``eps = 1 / (2 C_fit)`` from the star coefficients' growth
        (jet-coefficient norm proxy).
    method : {"closed", "quadrature"}
        ``T_k(h_l)`` from closed forms or from pointwise values by
        Gauss-Jacobi quadrature.

    Returns
    -------
    ProductReport
        For fixed ``N`` the fitted log-log slope; for ``"auto"`` the
        exponential-rate fit.
    """
    f = OracleSymbol.parse(f) if isinstance(f, str) else f
    g = OracleSymbol.parse(g) if isinstance(g, str) else g
    k_list = list(k_list)
    report = ProductReport()
    trivial = f.terms == ((0, 0, 0, 1),) and g.terms == ((0, 0, 0, 1),)
    if N == "auto":
        S = 4 if star is None else len(star.symbols) - 1
        while True:
            if star is None or len(star.symbols) <= S:
                star = star_coefficients(f, g, S, m)
            report.C_fit = fit_factorial_growth([j.truncate(2 * star.verified_to) for j in star.jets])
            report.epsilon = Fraction(default_epsilon(report.C_fit)).limit_denominator(10**6)
            need = max(floor_index(report.epsilon, k) for k in k_list)
            if need <= S:
                break
            S = need
    elif not trivial and (star is None or len(star.symbols) <= int(N)):
        star = star_coefficients(f, g, int(N), m)
    for k in k_list:
        Nk = floor_index(report.epsilon, k) if N == "auto" else int(N)
        Tf, Tg = toeplitz_matrix(f, k, m), toeplitz_matrix(g, k, m)
        R = Tf @ Tg
        if trivial:
            R = R - toeplitz_matrix(f, k, m)
        else:
            for ell in range(Nk + 1):
                h = star.symbols[ell]
                if method == "closed":
                    Th = toeplitz_matrix(h, k, m)
                else:
                    coeffs = h.x_coefficients()
                    diag, ok = toeplitz_radial_quadrature(
                        lambda x, c=coeffs: sum(float(cj) * x ** j for j, cj in enumerate(c)), k, m)
                    report.quadrature_ok &= ok
                    Th = ToeplitzMatrix(k, m, {(j, j): float(v) for j, v in enumerate(diag) if v != 0})
                R = R - Th.scale(mpq(1, k ** ell) if method == "closed" else 1.0 / k ** ell)
        A = _float_copy(R).dense
        op = operator_norm(A) if R.entries else 0.0
        ks = kernel_sup_norm(R) if (kernel_norm and R.entries) else None
        report.rows.append((k, Nk, op, ks))
    pos = [(k, r) for k, _, r, _ in report.rows if r > 0]
    if N != "auto" and len(pos) >= 2:
        report.slope = float(np.polyfit(np.log([k for k, _ in pos]), np.log([r for _, r in pos]), 1)[0])
    if N == "auto" and len(report.rows) >= 4:
        report.rate = fit_exponential_rate({k: r for k, _, r, _ in report.rows})
    return report


# -- covariant symbols by extrapolation -------------------------------------------

@dataclass
class CovariantEstimate:
    """Richardson estimates of ``B_l(f)(z)`` with error estimates."""

    values: list
    errors: list
    k_list: list
    condition: float
    exact: bool


def _solve_exact(A, b):
    n = len(A)
    M = [list(row) + [bi] for row, bi in zip(A, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                fac = M[r][col]
                M[r] = [a - fac * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _richardson(samples, kk, exact):
    A = [[(mpq(1, k) if exact else 1.0 / k) ** e for e in range(len(kk))] for k in kk]
    if exact:
        return _solve_exact(A, [samples[k] for k in kk])
    return list(np.linalg.solve(np.array(A, dtype=complex), np.array([complex(samples[k]) for k in kk])))


def covariant_from_oracle(f, cap: int, k_list, z=0, m: int = 0) -> CovariantEstimate:
    """Estimate ``B_0(f)(z), ..., B_cap(f)(z)`` from finite-k kernels.

    ``(2 pi / k) K_{T_k(f)}(z, z) = sum_l B_l(f)(z) k^-l``; the samples are
    interpolated by a polynomial in ``1/k`` of degree ``len(k_list) - 1``
    (exact rational solve for rational data).  Errors compare against the
    fit without the smallest ``k``.

    Raises
    ------
    PreconditionError
        If fewer than ``cap + 2`` distinct k values are supplied.
    """
    f = OracleSymbol.parse(f) if isinstance(f, str) else f
    kk = sorted(set(int(k) for k in k_list))
    if len(kk) < cap + 2:
        raise PreconditionError(f"need at least {cap + 2} distinct k values, got {len(kk)}")
    if isinstance(z, str):
        z = parse_scalar(z)
    samples = {k: diagonal_symbol(toeplitz_matrix(f, k, m), z) for k in kk}
    exact = all(is_exact(v) or isinstance(v, QQi) for v in samples.values())
    full = _richardson(samples, kk, exact)
    less = _richardson(samples, kk[1:], exact)
    vals = full[:cap + 1]
    errors = [abs(to_complex(a - b)) for a, b in zip(full[:cap + 1], less[:cap + 1])]
    V = np.array([[(1.0 / k) ** e for e in range(len(kk))] for k in kk])
    return CovariantEstimate(vals, errors, kk, float(np.linalg.cond(V)), exact)


# -- off-diagonal decay -------------------------------------------------------------

@dataclass
class OffdiagFit:
    rate: float
    reference: float
    samples: dict


def offdiag_rate(z, w, m: int = 0, k_list=range(8, 65)) -> OffdiagFit:
    """Fitted decay rate of ``|Pi_k(z, conj w)|`` in k.

    Regresses ``log |Pi_k|`` on ``[1, log k, k, 1/k]``: the ``log k`` column
    absorbs the polynomial prefactor and ``1/k`` its first correction.  The
    rate is minus the ``k`` coefficient.  The reference is ``-log |E(z, w)|``.

    Raises
    ------
    InadmissibleBaseError
        For antipodal points.
    """
    z, w = complex(z), complex(w)
    if abs(1 + z * w.conjugate()) == 0:
        raise InadmissibleBaseError("antipodal points: E vanishes")
    ks = list(k_list)
    samples = {k: abs(bergman_kernel_sum(k, m, z, w)) for k in ks}
    kf = np.array(ks, dtype=float)
    A = np.vstack([np.ones(len(ks)), np.log(kf), kf, 1 / kf]).T
    y = np.log([samples[k] for k in ks])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    ref = -log_e_norm(f"fs:{m}", z, w)
    return OffdiagFit(float(-coef[2]), float(ref), samples)
