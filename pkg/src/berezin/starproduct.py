"""The operators P_l and A_l, their coefficient tables, and the star product.

Two independent routes compute ``P_l(d)``:

* :func:`p_ell_apply` applies ``Delta~^(l+m)`` literally to ``c~^m d c~'``.
* :func:`level_table` pairs ``(sum_ij G^ij u_i v_j)^q`` with the Taylor
  coefficients of ``c~^m c~'``, producing ``K_l[alpha, beta] = P_l(u^alpha
  v^beta)`` as jets in the base-point displacement.  Everything built on
  jets of symbols (``A_l`` as a jet, the star product, rho and B) uses this
  route.

Only ``u``-degrees ``<= l`` and ``v``-degrees ``<= l`` of the argument can
contribute to ``P_l``, so tables carry ``|alpha|, |beta| <= l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as _iproduct

from gmpy2 import mpq

from .errors import InsufficientOrderError, LayoutError, PreconditionError
from .geometry import (KahlerModel, _mode, c_jet, cprime_jet, laplace_jets, metric_data, parse_model)
from .jets import (Jet, MultiIndex, VariableLayout, delta_power_apply, jet_derive, jet_mul,
                   monomial_mul, shift, substitute)
from .scalars import EXACT, magnitude

__all__ = [
    "BidiffCoefficientTable",
    "SymbolPrefix",
    "p_ell_apply",
    "level_table",
    "a_coeff",
    "a_table",
    "a_ell",
    "a_ell_jet",
    "star_product",
    "fit_a_growth",
    "multi_indices",
    "taylor_slot",
]


def multi_indices(n: int, max_order: int):
    """All multi-indices of length ``n`` and order ``<= max_order`` (graded)."""
    out = []
    for total in range(max_order + 1):
        for e in _iproduct(range(total + 1), repeat=n):
            if sum(e) == total:
                out.append(MultiIndex(e))
    return out


def _mi(a, n) -> MultiIndex:
    if isinstance(a, int):
        a = (a,)
    return MultiIndex(a, n)


def _fact(e) -> int:
    out = 1
    for x in e:
        out *= math.factorial(x)
    return out


# -- literal route -----------------------------------------------------------

def p_ell_apply(model, base, d: Jet, ell: int):
    """Value at the base point of ``P_l(d)`` by literal Laplacian powers.

    Parameters
    ----------
    d : Jet
        Jet in (u, v), known at least to total degree ``2 l``.
    ell : int

    Raises
    ------
    InsufficientOrderError
        If ``d`` is not known to total degree ``2 l``.
    """
    model = parse_model(model)
    n = model.n
    if d.layout != VariableLayout(n, ("u", "v")):
        raise LayoutError("p_ell_apply expects a jet in the (u, v) groups")
    need = 2 * ell
    if d.cap < need or any(c < need for _, c in d.bounds):
        raise InsufficientOrderError(
            f"P_{ell} needs the argument to total degree {need}; it is known to {d.cap}",
            required=need, available=d.cap)
    c = c_jet(model, base, 2 * ell + 2)
    cp = cprime_jet(model, base, 2 * ell)
    _, ginv0, b0, _ = metric_data(model, base, 0).at_base()
    total = 0
    E = jet_mul(d, cp, need)
    for m in range(2 * ell + 1):
        if m:
            E = jet_mul(E, c, 2 * (ell + m))
        if not E.coeffs:
            continue
        val = delta_power_apply(E, ginv0, ell + m).value()
        if val != 0:
            total = total + val * mpq(1, math.factorial(m) * math.factorial(ell + m))
    return b0 * total


# -- pairing route -----------------------------------------------------------

_TABLES: dict = {}


def _laplacian_power_pairing(Winv_parts, Em_parts, q, alpha, beta):
    """sum_{|a|=|b|=q} a! b! [W^q]_{ab} [E]_{a-alpha, b-beta} as an (x, y_c) jet."""
    acc = None
    for (ab), wq in Winv_parts.items():
        n = len(ab) // 2
        a, b = ab[:n], ab[n:]
        sa = tuple(x - y for x, y in zip(a, alpha))
        sb = tuple(x - y for x, y in zip(b, beta))
        if min(sa + sb, default=0) < 0:
            continue
        e = Em_parts.get(sa + sb)
        if e is None:
            continue
        term = jet_mul(wq, e).scale(_fact(a) * _fact(b))
        acc = term if acc is None else acc + term
    return acc


def level_table(model, base, p: int, D: int):
    """Table ``K_p[alpha, beta] = P_p(u^alpha v^beta)`` as jets in (x, y_c).

    Parameters
    ----------
    p : int
        Level.
    D : int
        Known order of the resulting jets in the base-point displacement.

    Returns
    -------
    dict
        ``(alpha, beta) -> Jet`` for ``|alpha|, |beta| <= p``.
    """
    model = parse_model(model)
    xs, ys = model.check_base(base)
    key = (model, _mode(xs, ys), xs, ys, p)
    hit = _TABLES.get(key)
    if hit is not None and hit[0] >= D:
        if hit[0] == D:
            return hit[1]
        return {k: v.truncate(D) for k, v in hit[1].items()}
    table = _build_level(model, (xs, ys), p, D)
    _TABLES[key] = (D, table)
    return table


def clear_cache():
    _TABLES.clear()


def _build_level(model: KahlerModel, base, p: int, D: int):
    n = model.n
    lay4 = VariableLayout(n)
    c4, cp4 = laplace_jets(model, base, D, p + 1, p + 1, D + 2 * p + 2, D + 2 * p)
    md = metric_data(model, base, D)
    xy = lay4.indices(["x", "y_c"])
    uidx, vidx = lay4.group_indices("u"), lay4.group_indices("v")
    # W = sum_ij G^ij(X, Y) u_i v_j
    W = None
    for i in range(n):
        for j in range(n):
            gij = shift(md.Ginv[i][j], lay4, {}, D + 2)
            ex = [0] * lay4.nvars
            ex[uidx[i]] += 1
            ex[vidx[j]] += 1
            t = monomial_mul(gij, ex)
            W = t if W is None else W + t
    W = Jet(lay4, W.coeffs, W.cap, W.bounds, [(uidx, 1), (vidx, 1), (uidx + vidx, 2)],
            mode=W.mode, _trusted=True)
    alphas = multi_indices(n, p)
    acc = {}
    E = cp4.truncate(D + 2 * p, [(xy, D), (uidx, p), (vidx, p)])
    Wq = None
    for m in range(2 * p + 1):
        q = p + m
        if m:
            E = jet_mul(E, c4, D + 2 * p + 2 * m, [(xy, D), (uidx, p + m), (vidx, p + m)])
        # advance W^q
        while Wq is None or Wq[0] < q:
            if Wq is None:
                Wq = (0, Jet.constant(lay4, 1, D + 2 * q, mode=W.mode))
            else:
                r = Wq[0] + 1
                Wq = (r, jet_mul(Wq[1], W, D + 2 * r, [(xy, D), (uidx, r), (vidx, r)]))
        if not E.coeffs:
            continue
        e_parts = E.split(["u", "v"])
        w_parts = Wq[1].split(["u", "v"])
        w_parts = {k: v for k, v in w_parts.items() if sum(k) == 2 * q}
        scale = mpq(1, math.factorial(m) * math.factorial(q))
        for al in alphas:
            for be in alphas:
                term = _laplacian_power_pairing(w_parts, e_parts, q, al, be)
                if term is None:
                    continue
                key = (al, be)
                term = term.scale(scale)
                acc[key] = term if key not in acc else acc[key] + term
    lay2 = VariableLayout(n, ("x", "y_c"))
    zero = Jet.zero(lay2, D, mode=md.b.mode)
    table = {}
    for al in alphas:
        for be in alphas:
            s = acc.get((al, be), zero)
            val = jet_mul(md.b, s, D)
            if val.cap < D:
                raise InsufficientOrderError(f"level table lost order: {val.cap} < {D}", D, val.cap)
            table[(al, be)] = val
    return table


# -- coefficient tables ---------------------------------------------------------

@dataclass
class BidiffCoefficientTable:
    """Coefficients ``a_{l, alpha, beta}`` at a base point.

    ``entries[(l, alpha, beta)] = P_l(u^alpha v^beta) / l!`` with ``alpha``
    paired with derivatives of the second argument (the x / u slot) and
    ``beta`` with the first (the y_c / v slot).
    """

    model: KahlerModel
    base: tuple
    max_order: int
    entries: dict = field(default_factory=dict)

    def __getitem__(self, key):
        ell, al, be = key
        n = self.model.n
        al, be = _mi(al, n), _mi(be, n)
        if al.order > ell or be.order > ell:
            return mpq(0)
        return self.entries[(ell, al, be)]

    def level_max(self, ell) -> float:
        return max((magnitude(v) for (l, _, _), v in self.entries.items() if l == ell), default=0.0)


def a_table(model, base, L: int) -> BidiffCoefficientTable:
    """All ``a_{l, alpha, beta}`` for ``l <= L`` at a base point."""
    model = parse_model(model)
    xs, ys = model.check_base(base)
    tab = BidiffCoefficientTable(model, (xs, ys), L)
    for ell in range(L + 1):
        k = level_table(model, (xs, ys), ell, 0)
        f = math.factorial(ell)
        for (al, be), jet in k.items():
            tab.entries[(ell, al, be)] = jet.value() / f
    return tab


def a_coeff(model, base, ell: int, alpha, beta):
    """``a_{l, alpha, beta} = P_l(u^alpha v^beta) / l!`` at the base point.

    Raises
    ------
    PreconditionError
        If ``|alpha| > l`` or ``|beta| > l``.
    """
    model = parse_model(model)
    n = model.n
    al, be = _mi(alpha, n), _mi(beta, n)
    if ell < 0 or al.order > ell or be.order > ell:
        raise PreconditionError(f"a-coefficient needs |alpha|, |beta| <= l; got {tuple(al)}, {tuple(be)}, l={ell}")
    return level_table(model, base, ell, 0)[(al, be)].value() / math.factorial(ell)


# -- A_l -------------------------------------------------------------------------

def taylor_slot(f: Jet, group: str, exps) -> Jet:
    """``[h^exps] f(..., g + h, ...)``: the Taylor coefficient ``d^e f / e!`` in ``group``."""
    idx = f.layout.group_indices(group)
    out = f
    for i, e in zip(idx, exps):
        for _ in range(e):
            out = jet_derive(out, i)
    return out.scale(mpq(1, _fact(exps)))


def _check_xy(f: Jet, n: int):
    if f.layout != VariableLayout(n, ("x", "y_c")):
        raise LayoutError("symbols must be jets in the (x, y_c) groups")


def a_ell(model, base, f: Jet, g: Jet, ell: int):
    """Value at the base of ``A_l(f, g) = P_l(f(x, y_c + v) g(x + u, y_c))``.

    Uses the literal route on ``d(u, v) = f(x0, y0 + v) g(x0 + u, y0)``.

    Raises
    ------
    InsufficientOrderError
        If ``f`` or ``g`` is known to order below ``2 l``.
    """
    model = parse_model(model)
    n = model.n
    _check_xy(f, n)
    _check_xy(g, n)
    need = 2 * ell
    for name, h in (("f", f), ("g", g)):
        if h.cap < need:
            raise InsufficientOrderError(f"A_{ell} needs {name} to order {need}; it is known to {h.cap}",
                                         required=need, available=h.cap)
    uv = VariableLayout(n, ("u", "v"))
    fv = substitute(f, uv, {n + i: (n + i,) for i in range(n)}, need)
    gu = substitute(g, uv, {i: (i,) for i in range(n)}, need)
    return p_ell_apply(model, base, jet_mul(fv, gu, need), ell)


def a_ell_jet(model, base, f: Jet, g: Jet, ell: int, order=None) -> Jet:
    """``A_l(f, g)`` as a jet in (x, y_c) via the coefficient table.

    ``A_l(f, g) = sum K_l[alpha, beta] [v^beta] f(x, y_c + v) [u^alpha] g(x + u, y_c)``.
    The result is known to order ``min(f.cap, g.cap) - l`` (or ``order``).
    """
    model = parse_model(model)
    n = model.n
    _check_xy(f, n)
    _check_xy(g, n)
    D = min(f.cap, g.cap) - ell if order is None else order
    if D < 0 or D > min(f.cap, g.cap) - ell:
        raise InsufficientOrderError(
            f"A_{ell} to order {D} needs inputs of order {max(D, 0) + ell}",
            required=max(D, 0) + ell, available=min(f.cap, g.cap))
    K = level_table(model, base, ell, D)
    fs = {}
    gs = {}
    acc = Jet.zero(f.layout, D, mode=f.mode)
    for (al, be), k in K.items():
        if not k.coeffs:
            continue
        if be not in fs:
            fs[be] = taylor_slot(f, "y_c", be)
        if al not in gs:
            gs[al] = taylor_slot(g, "x", al)
        if not fs[be].coeffs or not gs[al].coeffs:
            continue
        acc = acc + jet_mul(jet_mul(k, fs[be], D), gs[al], D)
    return acc.truncate(D)


# -- symbol prefixes and the star product -------------------------------------

@dataclass
class SymbolPrefix:
    """Finite prefix ``sum_l hbar^l a_l`` with jet (or scalar) coefficients."""

    coeffs: list

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]

    @property
    def cap(self) -> int:
        return len(self.coeffs) - 1

    def values(self):
        return [c.value() if isinstance(c, Jet) else c for c in self.coeffs]

    def agrees(self, other, upto=None) -> bool:
        upto = min(self.cap, other.cap) if upto is None else upto
        for a, b in zip(self.coeffs[:upto + 1], other.coeffs[:upto + 1]):
            if isinstance(a, Jet) and isinstance(b, Jet):
                if not a.agrees(b):
                    return False
            elif (a.value() if isinstance(a, Jet) else a) != (b.value() if isinstance(b, Jet) else b):
                return False
        return True

    def __add__(self, other):
        m = max(len(self), len(other))
        out = []
        for i in range(m):
            if i >= len(self):
                out.append(other[i])
            elif i >= len(other):
                out.append(self[i])
            else:
                out.append(self[i] + other[i])
        return SymbolPrefix(out)

    def __sub__(self, other):
        return self + SymbolPrefix([-c for c in other.coeffs])

    @classmethod
    def from_jet(cls, jet, cap):
        """``jet`` at order 0, zeros above."""
        zero = Jet.zero(jet.layout, jet.cap, mode=jet.mode)
        return cls([jet] + [zero] * cap)


def _as_jet(c, layout, order, mode=EXACT):
    if isinstance(c, Jet):
        return c
    return Jet.constant(layout, c, order, mode=mode)


def star_product(model, base, F: SymbolPrefix, G: SymbolPrefix, cap: int) -> SymbolPrefix:
    """Prefix to ``hbar^cap`` of ``F * G = sum hbar^(l+m+p) A_l(f_m, g_p)``.

    Coefficient ``j`` of the result is known to order ``min`` over its terms
    of ``min(f_m.cap, g_p.cap) - l``.

    Raises
    ------
    InsufficientOrderError
        If some needed ``A_l(f_m, g_p)`` has negative order.
    """
    model = parse_model(model)
    n = model.n
    lay = VariableLayout(n, ("x", "y_c"))
    jets = [c for c in list(F.coeffs) + list(G.coeffs) if isinstance(c, Jet)]
    big = max((j.cap for j in jets), default=2 * cap) + cap
    Fj = [_as_jet(c, lay, big) for c in F.coeffs]
    Gj = [_as_jet(c, lay, big) for c in G.coeffs]
    out = []
    for j in range(cap + 1):
        acc = None
        for ell in range(j + 1):
            for m in range(j - ell + 1):
                pp = j - ell - m
                if m >= len(Fj) or pp >= len(Gj):
                    continue
                f, g = Fj[m], Gj[pp]
                if not f.coeffs or not g.coeffs:
                    D = min(f.cap, g.cap) - ell
                    if D < 0:
                        raise InsufficientOrderError(
                            f"star product term A_{ell}(f_{m}, g_{pp}) needs order {ell}",
                            required=ell, available=min(f.cap, g.cap))
                    term = Jet.zero(lay, D, mode=f.mode)
                else:
                    term = a_ell_jet(model, base, f, g, ell)
                acc = term if acc is None else acc + term
        out.append(acc)
    return SymbolPrefix(out)


# -- growth scans --------------------------------------------------------------

@dataclass
class GrowthFit:
    """Fitted constant ``C`` with per-level maxima."""

    C: float
    per_level: list
    per_level_C: list

    def running(self) -> list:
        out, best = [], 0.0
        for c in self.per_level_C:
            best = max(best, c)
            out.append(best)
        return out


def fit_a_growth(model, bases, Lmax: int) -> GrowthFit:
    """Fit ``C = max |a_{l, alpha, beta}|^(1/(l+1))`` over bases and ``l <= Lmax``."""
    model = parse_model(model)
    per_level = [0.0] * (Lmax + 1)
    for base in bases:
        tab = a_table(model, base, Lmax)
        for ell in range(Lmax + 1):
            per_level[ell] = max(per_level[ell], tab.level_max(ell))
    per_C = [m ** (1.0 / (ell + 1)) for ell, m in enumerate(per_level)]
    return GrowthFit(max(per_C), per_level, per_C)
