"""The map ``B = sum hbar^l B_l`` from multipliers to covariant symbols.

``B_l(f) = sum_{p+q+r=l} sum_{|alpha|,|beta|<=p} K_p[alpha, beta]
[u^alpha v^beta] rho_q(x, y_c + v) f(x + u, y_c + v) rho_r(x + u, y_c)``
with ``K_p[alpha, beta] = p! a_{p, alpha, beta}`` the level tables of
:mod:`berezin.starproduct`.  ``alpha`` differentiates the holomorphic
(``u``) slot, ``beta`` the antiholomorphic (``v``) slot; the swapped pairing
disagrees with the CP^1 oracle.

``B^-1`` is the operator-series inverse of ``id - sum hbar^l (-B_l)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .bergman import rho_jets
from .errors import InsufficientOrderError, LayoutError
from .geometry import KahlerModel, _mode, parse_model
from .jets import Jet, VariableLayout, jet_mul, shift
from .starproduct import SymbolPrefix, level_table, multi_indices
from .symbols import OperatorSeries, invert_operator_series

__all__ = ["BOperatorTable", "b_ell_jet", "b_ell_apply", "b_map", "b_inverse_map",
           "b_inverse_series", "b_inverse_coefficients"]


@dataclass
class BOperatorTable:
    """Data for applying ``B_1..B_max_order`` at a base point.

    Holds the level tables ``K_p`` and the ``rho`` jets, both computed
    lazily per requested order.  ``B_0`` acts as the identity.
    """

    model: KahlerModel
    base: tuple
    max_order: int
    _rho: dict = field(default_factory=dict, repr=False)

    def rho(self, ell, D):
        """``rho_0..rho_ell`` with ``rho_q`` known to at least ``D + 2 ell - q``."""
        key = (ell, D)
        if key not in self._rho:
            self._rho[key] = rho_jets(self.model, self.base, ell, out_order=D + ell).coeffs
        return self._rho[key]

    def apply(self, f: Jet, ell: int, order=None) -> Jet:
        """``B_l(f)`` as a jet, known to ``f.cap - 2 l`` (or ``order``)."""
        n = self.model.n
        if f.layout != VariableLayout(n, ("x", "y_c")):
            raise LayoutError("symbols must be jets in the (x, y_c) groups")
        if ell == 0:
            return f if order is None else f.truncate(order)
        D = f.cap - 2 * ell if order is None else order
        if D < 0 or D + 2 * ell > f.cap:
            need = max(D, 0) + 2 * ell
            raise InsufficientOrderError(
                f"B_{ell} to order {max(D, 0)} needs the argument to order {need}; it is known to {f.cap}",
                required=need, available=f.cap)
        rho = self.rho(ell, D)
        lay4 = VariableLayout(n)
        xy = lay4.indices(["x", "y_c"])
        uidx, vidx = lay4.group_indices("u"), lay4.group_indices("v")
        acc = Jet.zero(f.layout, D, mode=f.mode)
        for p in range(ell + 1):
            cap4 = D + 2 * p
            bounds = [(xy, D), (uidx, p), (vidx, p)]
            K = level_table(self.model, self.base, p, D)
            f4 = shift(f, lay4, {"x": "u", "y_c": "v"}, cap4, bounds)
            left = {}
            right = {}
            total = None
            for q in range(ell - p + 1):
                r = ell - p - q
                if q not in left:
                    left[q] = shift(rho[q], lay4, {"y_c": "v"}, cap4, bounds)
                if r not in right:
                    right[r] = shift(rho[r], lay4, {"x": "u"}, cap4, bounds)
                if not left[q].coeffs or not right[r].coeffs:
                    continue
                d = jet_mul(jet_mul(left[q], f4, cap4, bounds), right[r], cap4, bounds)
                total = d if total is None else total + d
            if total is None or not total.coeffs:
                continue
            parts = total.split(["u", "v"])
            for al in multi_indices(n, p):
                for be in multi_indices(n, p):
                    part = parts.get(tuple(al) + tuple(be))
                    k = K[(al, be)]
                    if part is None or not k.coeffs:
                        continue
                    acc = acc + jet_mul(k, part, D)
        return acc.truncate(D)


_TABLES: dict = {}


def _table(model, base, ell) -> BOperatorTable:
    model = parse_model(model)
    xs, ys = model.check_base(base)
    key = (model, _mode(xs, ys), xs, ys)
    tab = _TABLES.get(key)
    if tab is None or tab.max_order < ell:
        tab = BOperatorTable(model, (xs, ys), ell)
        _TABLES[key] = tab
    return tab


def b_ell_jet(model, base, f: Jet, ell: int, order=None) -> Jet:
    """``B_l(f)`` as a jet in (x, y_c), known to ``f.cap - 2 l`` by default."""
    return _table(model, base, ell).apply(f, ell, order)


def b_ell_apply(model, base, f: Jet, ell: int):
    """Value of ``B_l(f)`` at the base.

    Raises
    ------
    InsufficientOrderError
        If ``f`` is known to order below ``2 l``.

    Examples
    --------
    >>> from berezin.jets import Jet, VariableLayout
    >>> one = Jet.constant(VariableLayout(1, ("x", "y_c")), 1, 2)
    >>> b_ell_apply("fs:0", (0, 0), one, 1)
    mpq(1,1)
    """
    return b_ell_jet(model, base, f, ell, order=0).value()


def _layout(model):
    return VariableLayout(parse_model(model).n, ("x", "y_c"))


def _jets(F, lay):
    out = []
    for c in F.coeffs:
        out.append(c if isinstance(c, Jet) else Jet.constant(lay, c, 0))
    return out


def b_map(model, base, F: SymbolPrefix, cap: int) -> SymbolPrefix:
    """Prefix to ``hbar^cap`` of ``B(F) = sum hbar^(l+m) B_l(f_m)``."""
    lay = _layout(model)
    Fj = _jets(F, lay)
    tab = _table(model, base, cap)
    out = []
    for j in range(cap + 1):
        acc = None
        for m in range(min(j, len(Fj) - 1) + 1):
            term = tab.apply(Fj[m], j - m)
            acc = term if acc is None else acc + term
        out.append(acc)
    return SymbolPrefix(out)


def b_inverse_series(model, base, cap: int) -> OperatorSeries:
    """``B^-1 = id + sum hbar^m Q_m`` as an :class:`OperatorSeries` of actions."""
    tab = _table(model, base, cap)

    def neg_b(ell):
        return lambda f: -tab.apply(f, ell)

    P = OperatorSeries([neg_b(ell) for ell in range(1, cap + 1)])
    return invert_operator_series(P, cap)


def b_inverse_map(model, base, F: SymbolPrefix, cap: int) -> SymbolPrefix:
    """Prefix ``G`` with ``B(G) = F`` modulo ``hbar^(cap + 1)``.

    ``G_j = sum_{m + i = j} Q_m(F_i)`` with ``Q_0 = id``.
    """
    lay = _layout(model)
    Fj = _jets(F, lay)
    Q = b_inverse_series(model, base, cap)
    out = []
    for j in range(cap + 1):
        acc = None
        for i in range(min(j, len(Fj) - 1) + 1):
            m = j - i
            term = Fj[i] if m == 0 else Q.apply(m, Fj[i])
            if term is None:
                continue
            acc = term if acc is None else acc + term
        out.append(acc)
    return SymbolPrefix(out)


def b_inverse_coefficients(model, base, L: int) -> dict:
    """Coefficient tables of ``B^-1``: ``{l: {(a, b): Q_l(X^a Y^b)(base)}}``.

    ``Q_l`` is a differential operator of order at most ``l`` in each of
    the two slots, so ``|a|, |b| <= l`` exhausts it.  The entries are the
    coefficients of ``Q_l`` against the Taylor basis ``d^a d^b / (a! b!)``.
    """
    model = parse_model(model)
    n = model.n
    lay = _layout(model)
    Q = b_inverse_series(model, base, L)
    out = {}
    for ell in range(1, L + 1):
        row = {}
        for a in multi_indices(n, ell):
            for b in multi_indices(n, ell):
                mono = Jet.monomial(lay, tuple(a) + tuple(b), 2 * ell)
                val = Q.apply(ell, mono)
                row[(tuple(a), tuple(b))] = val.value() if val is not None else 0
        out[ell] = row
    return out
