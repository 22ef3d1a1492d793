"""Built-in Kahler model geometries and their Laplace phase data.

Three local models are provided, selected by strings:

``flat:n``
    ``phi = sum_i x_i y_c,i`` on C^n, trivial auxiliary bundle.
``fs:m``
    Fubini-Study chart on CP^1, ``phi = log(1 + x y_c)``, auxiliary
    potential ``m * phi`` (the bundle O(m)).
``pflat:p/q``
    Perturbed flat line, ``phi = w + lam w^2 / 2`` with ``w = x y_c``.

All jets are taken at a base point ``(x0, y0)`` of the complexified chart;
the diagonal is ``y0 = conj(x0)``.  The Liouville density is ``det G`` and
the flat reference measure carries a ``2^n`` factor relative to Lebesgue
measure on R^{2n}, so that the flat Bergman density is ``(k / 2 pi)^n`` with
``rho_0 = 1``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from gmpy2 import mpq

from .errors import ConditionError, InadmissibleBaseError, LayoutError, PreconditionError
from .jets import (Jet, VariableLayout, jet_exp, jet_log1p, jet_mul, jet_reciprocal,
                   jet_derive, monomial_mul, shift)
from .scalars import EXACT, FLOAT, QQi, is_exact, magnitude, parse_scalar, to_complex, to_float

COND_LIMIT = 1e12

__all__ = [
    "KahlerModel",
    "PhaseData",
    "parse_model",
    "parse_base",
    "potential_jet",
    "metric_data",
    "c_jet",
    "cprime_jet",
    "phase_data",
    "log_e_norm",
    "laplace_jets",
]


def _abs2(z):
    if isinstance(z, QQi):
        return z.re * z.re + z.im * z.im
    if is_exact(z):
        return mpq(z) * mpq(z)
    return abs(to_complex(z)) ** 2


@dataclass(frozen=True)
class KahlerModel:
    """A local analytic Kahler geometry.

    Parameters
    ----------
    kind : {"flat", "fs", "pflat"}
    n : int
        Complex dimension.
    param : int or mpq
        ``m`` for ``fs``, ``lam`` for ``pflat``; unused for ``flat``.
    """

    kind: str
    n: int = 1
    param: object = 0

    @property
    def name(self) -> str:
        if self.kind == "flat":
            return f"flat:{self.n}"
        if self.kind == "fs":
            return f"fs:{self.param}"
        lam = mpq(self.param)
        txt = str(lam.numerator) if lam.denominator == 1 else f"{lam.numerator}/{lam.denominator}"
        return f"pflat:{txt}"

    def __str__(self):
        return self.name

    @property
    def has_global_potential(self) -> bool:
        return self.kind in ("flat", "fs")

    @property
    def aux_degree(self) -> int:
        return int(self.param) if self.kind == "fs" else 0

    def admissible(self, base) -> bool:
        xs, ys = parse_base(base, self.n)
        if self.kind == "flat":
            return True
        w = xs[0] * ys[0]
        if self.kind == "fs":
            return (1 + w) != 0
        lam = mpq(self.param)
        # |lam x0 y0| < 1/2, compared in squares to stay rational
        return lam * lam * _abs2(w) < mpq(1, 4)

    def check_base(self, base):
        xs, ys = parse_base(base, self.n)
        if not self.admissible((xs, ys)):
            raise InadmissibleBaseError(f"base point {base} is not admissible for {self.name}")
        return xs, ys


def parse_model(text) -> KahlerModel:
    """Parse ``"flat:n"``, ``"fs:m"`` or ``"pflat:p/q"``."""
    if isinstance(text, KahlerModel):
        return text
    kind, _, arg = str(text).strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "flat":
            n = int(arg or 1)
            if n < 1:
                raise ValueError
            return KahlerModel("flat", n, 0)
        if kind == "fs":
            m = int(arg or 0)
            if m < 0:
                raise ValueError
            return KahlerModel("fs", 1, m)
        if kind == "pflat":
            return KahlerModel("pflat", 1, parse_scalar(arg))
    except ValueError:
        pass
    raise ValueError(f"bad model string {text!r}; expected flat:n, fs:m or pflat:p/q")


def parse_base(base, n=1):
    """Normalize a base point to ``(xs, ys)`` tuples of length ``n``.

    Accepts ``(x0, y0)`` for ``n = 1``, ``(xs, ys)`` pairs of sequences, a
    flat sequence of ``2n`` scalars, or a comma-separated string.
    """
    if isinstance(base, str):
        base = [parse_scalar(t) for t in base.split(",") if t.strip()]
    base = tuple(base)
    if len(base) == 2 and isinstance(base[0], (tuple, list)):
        xs, ys = tuple(base[0]), tuple(base[1])
    elif len(base) == 2 * n:
        xs, ys = base[:n], base[n:]
    else:
        raise LayoutError(f"base point needs {2 * n} coordinates, got {len(base)}")
    if len(xs) != n or len(ys) != n:
        raise LayoutError(f"base point needs {n} coordinates per group")

    def norm(c):
        if isinstance(c, str):
            c = parse_scalar(c)
        if isinstance(c, QQi):
            return c if c.im else c.re
        if is_exact(c):
            return mpq(c)
        return to_float(c)

    return tuple(norm(c) for c in xs), tuple(norm(c) for c in ys)


def _mode(xs, ys):
    return EXACT if all(is_exact(c) for c in xs + ys) else FLOAT


def _xy(n):
    return VariableLayout(n, ("x", "y_c"))


def _uv(n):
    return VariableLayout(n, ("u", "v"))


def _full(n):
    return VariableLayout(n)


def _potential_nc(model: KahlerModel, xs, ys, order: int, aux=False) -> Jet:
    """Jet of phi(x0 + P, y0 + Q) without its constant term, in layout (x, y_c)."""
    n = model.n
    lay = _xy(n)
    mode = _mode(xs, ys)
    nv = lay.nvars
    if aux:
        if model.kind != "fs" or model.aux_degree == 0:
            return Jet.zero(lay, order, mode=mode)
        return _potential_nc(model, xs, ys, order).scale(model.aux_degree)
    terms = {}

    def key(i=None, j=None, extra=None):
        k = [0] * nv
        if i is not None:
            k[i] += 1
        if j is not None:
            k[n + j] += 1
        return tuple(k)

    # t = y0 P + x0 Q + P Q per coordinate
    if model.kind == "flat":
        for i in range(n):
            terms[key(i)] = terms.get(key(i), 0) + ys[i]
            terms[key(None, i)] = terms.get(key(None, i), 0) + xs[i]
            terms[key(i, i)] = terms.get(key(i, i), 0) + 1
        return Jet(lay, terms, order, mode=mode)
    t = Jet(lay, {key(0): ys[0], key(None, 0): xs[0], key(0, 0): 1}, order, mode=mode)
    w0 = xs[0] * ys[0]
    if model.kind == "fs":
        s = 1 + w0
        return jet_log1p(t.scale(1 / s), order)
    lam = mpq(model.param)
    return t.scale(1 + lam * w0) + jet_mul(t, t, order).scale(lam / 2)


def _potential_constant(model, xs, ys):
    if model.kind == "flat":
        return sum((x * y for x, y in zip(xs, ys)), mpq(0))
    w0 = xs[0] * ys[0]
    if model.kind == "pflat":
        lam = mpq(model.param)
        return w0 + lam * w0 * w0 / 2
    s = 1 + w0
    if s == 1:
        return mpq(0)
    z = to_float(s)
    import gmpy2
    return gmpy2.log(z)


def potential_jet(model, base, order: int) -> Jet:
    """Jet of ``phi(x0 + u, y0 + v)`` in the (u, v) variables.

    The result is exact unless the constant term ``phi(x0, y0)`` is
    irrational (e.g. ``log 2`` on FS away from the origin), in which case the
    whole jet is returned in float mode.

    Raises
    ------
    InadmissibleBaseError
    """
    model = parse_model(model)
    if order < 0:
        raise PreconditionError("order must be >= 0")
    xs, ys = model.check_base(base)
    nc = _potential_nc(model, xs, ys, order)
    const = _potential_constant(model, xs, ys)
    jet = Jet(_uv(model.n), dict(nc.coeffs), order, mode=nc.mode)
    if not is_exact(const):
        jet = jet.to_float()
    return jet + const


# -- metric data ---------------------------------------------------------------

def _jet_matrix_inverse(M, order):
    """Gauss-Jordan inverse and determinant of a square matrix of jets."""
    n = len(M)
    A = [list(row) for row in M]
    lay = A[0][0].layout
    mode = A[0][0].mode
    inv = [[Jet.constant(lay, 1 if i == j else 0, order, mode=mode) for j in range(n)] for i in range(n)]
    det = Jet.constant(lay, 1, order, mode=mode)
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col].value() != 0), None)
        if piv is None:
            raise ConditionError("metric matrix is singular at the base point")
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            inv[col], inv[piv] = inv[piv], inv[col]
            det = -det
        p = A[col][col]
        det = jet_mul(det, p, order)
        pinv = jet_reciprocal(p, order)
        A[col] = [jet_mul(e, pinv, order) for e in A[col]]
        inv[col] = [jet_mul(e, pinv, order) for e in inv[col]]
        for r in range(n):
            if r == col:
                continue
            f = A[r][col]
            if not f.coeffs:
                continue
            A[r] = [e - jet_mul(f, a, order) for e, a in zip(A[r], A[col])]
            inv[r] = [e - jet_mul(f, a, order) for e, a in zip(inv[r], inv[col])]
    return inv, det


def _condition_check(G0):
    mat = np.array([[to_complex(c) for c in row] for row in G0], dtype=complex)
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditionError(f"metric matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}")


@dataclass
class PhaseData:
    """Phase data of the Laplace expansion at a base point.

    Attributes
    ----------
    base : tuple
        ``(xs, ys)``.
    order : int
    G, Ginv : list of list of Jet
        Metric and inverse as jets in (x, y_c).
    b, delta : Jet
        ``1 / det G`` and ``det G``.
    c, cprime : Jet or None
        The phase ``c~`` and amplitude ``c~'`` as jets in (u, v).
    """

    base: tuple
    order: int
    G: list
    Ginv: list
    b: Jet
    delta: Jet
    c: Jet | None = None
    cprime: Jet | None = None
    mode: str = EXACT

    def at_base(self):
        """Scalar ``(G, Ginv, b, delta)`` at the base point."""
        G0 = [[e.value() for e in row] for row in self.G]
        Gi0 = [[e.value() for e in row] for row in self.Ginv]
        return G0, Gi0, self.b.value(), self.delta.value()


def _metric_xy(model, xs, ys, order):
    n = model.n
    phi = _potential_nc(model, xs, ys, order + 2)
    G = [[jet_derive(jet_derive(phi, i), n + j) for j in range(n)] for i in range(n)]
    G0 = [[e.value() for e in row] for row in G]
    if phi.mode == FLOAT:
        _condition_check(G0)
    Ginv, det = _jet_matrix_inverse(G, order)
    return G, Ginv, det


@lru_cache(maxsize=256)
def _metric_cached(model, mode, xs, ys, order):
    G, Ginv, det = _metric_xy(model, xs, ys, order)
    return G, Ginv, det, jet_reciprocal(det, order)


def metric_data(model, base, order: int) -> PhaseData:
    """Jets of ``G``, ``G^{-1}``, ``b = 1/det G`` and ``delta = det G`` at a base.

    Raises
    ------
    InadmissibleBaseError
    ConditionError
        If ``G`` is singular, or its condition number exceeds ``1e12`` in
        float mode.
    """
    model = parse_model(model)
    xs, ys = model.check_base(base)
    G, Ginv, det, b = _metric_cached(model, _mode(xs, ys), xs, ys, order)
    return PhaseData((xs, ys), order, G, Ginv, b, det, mode=det.mode)


# -- phase jets --------------------------------------------------------------

def _four_term(phi, lay4, bounds, cap):
    """phi(X, Y+v) + phi(X+u, Y) - phi(X, Y) - phi(X+u, Y+v) on ``lay4``."""
    a = shift(phi, lay4, {"y_c": "v"}, cap, bounds)
    b = shift(phi, lay4, {"x": "u"}, cap, bounds)
    c = shift(phi, lay4, {}, cap, bounds)
    d = shift(phi, lay4, {"x": "u", "y_c": "v"}, cap, bounds)
    out = a + b - c - d
    u = lay4.group_indices("u")
    v = lay4.group_indices("v")
    # only mixed monomials survive, of total (u, v) degree >= 2
    vals = [(u, 1), (v, 1), (u + v, 2)]
    return Jet(lay4, out.coeffs, out.cap, out.bounds, vals, mode=out.mode, _trusted=True)


def _phase_bounds(lay4, xy_order, ucap, vcap):
    xy = lay4.indices(["x", "y_c"])
    return [(xy, xy_order), (lay4.group_indices("u"), ucap), (lay4.group_indices("v"), vcap)]


def laplace_jets(model, base, xy_order: int, ucap: int, vcap: int, total: int, prime_total=None):
    """Phase ``c~`` and amplitude ``c~'`` as jets in (x, y_c, u, v).

    The (x, y_c) variables are displacements of the base point, so every
    coefficient of a (u, v) monomial is itself a jet at the base.

    Parameters
    ----------
    xy_order : int
        Known degree in the (x, y_c) displacement.
    ucap, vcap : int
        Caps on the u- and v-degrees.
    total : int
        Total-degree cap of ``c~``.
    prime_total : int, optional
        Total-degree cap of ``c~'`` (defaults to ``total``).

    Returns
    -------
    c, cprime : Jet
    """
    model = parse_model(model)
    xs, ys = model.check_base(base)
    return _laplace_cached(model, _mode(xs, ys), xs, ys, xy_order, ucap, vcap, total,
                           total if prime_total is None else prime_total)


@lru_cache(maxsize=128)
def _laplace_cached(model, mode, xs, ys, xy_order, ucap, vcap, total, prime_total):
    n = model.n
    lay4 = _full(n)
    bounds = _phase_bounds(lay4, xy_order, ucap, vcap)
    phi = _potential_nc(model, xs, ys, total)
    c4 = _four_term(phi, lay4, bounds, total)
    # + sum_ij G_ij(X, Y) u_i v_j
    G, _, det, _ = _metric_cached(model, _mode(xs, ys), xs, ys, max(total - 2, 0))
    for i in range(n):
        for j in range(n):
            gij = shift(G[i][j], lay4, {}, total, bounds)
            ex = [0] * lay4.nvars
            ex[lay4.group_indices("u")[i]] += 1
            ex[lay4.group_indices("v")[j]] += 1
            c4 = c4 + monomial_mul(gij, ex).truncate(total, bounds)
    uidx, vidx = lay4.group_indices("u"), lay4.group_indices("v")
    c4 = Jet(lay4, c4.coeffs, c4.cap, c4.bounds, [(uidx, 1), (vidx, 1), (uidx + vidx, 3)],
             mode=c4.mode, _trusted=True)
    # c' = exp(four_term(phi')) * delta(X + u, Y + v)
    pb = _phase_bounds(lay4, xy_order, ucap, vcap)
    if model.aux_degree:
        phip = _potential_nc(model, xs, ys, prime_total, aux=True)
        e = jet_exp(_four_term(phip, lay4, pb, prime_total), prime_total)
    else:
        e = Jet.constant(lay4, 1, prime_total, mode=c4.mode)
    _, _, detp, _ = _metric_cached(model, _mode(xs, ys), xs, ys, prime_total)
    dshift = shift(detp, lay4, {"x": "u", "y_c": "v"}, prime_total, pb)
    cprime = jet_mul(e, dshift, prime_total, pb)
    return c4, cprime


def _uv_slice(jet4):
    """Restrict a (x, y_c, u, v) jet to the base point: a jet in (u, v)."""
    return jet4.extract(["x", "y_c"], (0,) * (2 * jet4.layout.n))


def c_jet(model, base, order: int) -> Jet:
    """Jet in (u, v) of the phase ``c~`` at the base point.

    Only mixed monomials ``u^a v^b`` with ``|a|, |b| >= 1`` and total degree
    at least 3 occur.
    """
    c4, _ = laplace_jets(model, base, 0, order, order, order, 0)
    return _uv_slice(c4)


def cprime_jet(model, base, order: int) -> Jet:
    """Jet in (u, v) of the amplitude ``c~' = exp(-psi~') det G~(x0+u, y0+v)``."""
    model = parse_model(model)
    xs, ys = model.check_base(base)
    _, cp = _laplace_cached(model, _mode(xs, ys), xs, ys, 0, order, order, 0, order)
    return _uv_slice(cp)


def phase_data(model, base, order: int) -> PhaseData:
    """All phase data: metric jets in (x, y_c) plus ``c~``, ``c~'`` in (u, v)."""
    pd = metric_data(model, base, order)
    pd.c = c_jet(model, base, order)
    pd.cprime = cprime_jet(model, base, order)
    return pd


# -- global potential --------------------------------------------------------

def _as_vec(z, n):
    if isinstance(z, (list, tuple)):
        vals = [to_complex(c) for c in z]
    else:
        vals = [to_complex(z)]
    if len(vals) != n:
        raise LayoutError(f"point needs {n} coordinates")
    return vals


def log_e_norm(model, z, w) -> float:
    """``log |E(z, conj w)|``; 0 on the diagonal, negative off it.

    Returns ``-inf`` where ``E`` vanishes (antipodal points on FS).

    Raises
    ------
    PreconditionError
        For models without a global potential formula.
    """
    model = parse_model(model)
    if not model.has_global_potential:
        raise PreconditionError(f"{model.name} has no global potential formula")
    zs, ws = _as_vec(z, model.n), _as_vec(w, model.n)
    if model.kind == "flat":
        return -0.5 * sum(abs(a - b) ** 2 for a, b in zip(zs, ws))
    a, b = zs[0], ws[0]
    cross = 1 + a * b.conjugate()
    if cross == 0:
        return -math.inf
    return math.log(abs(cross)) - 0.5 * math.log1p(abs(a) ** 2) - 0.5 * math.log1p(abs(b) ** 2)
