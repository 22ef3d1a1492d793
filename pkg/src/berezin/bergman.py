"""Bergman-kernel symbol ``rho`` from the unit condition ``rho * 1 = 1``.

``rho_0 = 1`` and ``rho_m = sum_{j=1}^m Q_j(rho_{m-j})`` with
``Q_j(f) = -A_j(f, 1)``.  Only the ``alpha = 0`` row of the level tables
enters, since ``g = 1`` has no ``u``-dependence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import gmpy2
from gmpy2 import mpq

from .errors import PreconditionError
from .geometry import _mode, parse_model
from .jets import Jet, MultiIndex, VariableLayout, jet_mul
from .scalars import magnitude, to_float
from .starproduct import level_table, taylor_slot
from .symbols import compositions, fit_factorial_growth, floor_index, running_constants

__all__ = ["BergmanSymbol", "q_apply", "rho_jets", "rho_via_compositions", "bergman_partial_sum",
           "bergman_growth"]


@dataclass
class BergmanSymbol:
    """Coefficients ``rho_0..rho_cap`` as jets at a base point.

    Attributes
    ----------
    coeffs : list of Jet
        ``coeffs[m]`` is known to order ``out_order + cap - m``.
    term_counts : list of int
        Number of composition terms summed per level (composition route
        only; the recursion leaves this empty).
    """

    model: object
    base: tuple
    coeffs: list
    out_order: int
    term_counts: list = field(default_factory=list)

    @property
    def cap(self) -> int:
        return len(self.coeffs) - 1

    def values(self) -> list:
        return [c.value() for c in self.coeffs]

    def growth(self, kind="power"):
        """Fitted constant plus per-level and running constants.

        ``kind="power"`` uses ``|rho_l| <= C^(l+1) l^l`` (the proven bound);
        ``"factorial"`` uses ``l!``.  Jets are normed at the base point.
        """
        vals = [magnitude(v) for v in self.values()]
        per, run = running_constants(vals, kind)
        return run[-1], per, run


def q_apply(model, base, f: Jet, j: int) -> Jet:
    """``Q_j(f) = -A_j(f, 1)``, known to order ``f.cap - j``."""
    D = f.cap - j
    if D < 0:
        raise PreconditionError(f"Q_{j} needs the argument to order {j}")
    K = level_table(model, base, j, D)
    n = f.layout.n
    zero = MultiIndex((0,) * n)
    acc = Jet.zero(f.layout, D, mode=f.mode)
    for (al, be), k in K.items():
        if al != zero or not k.coeffs:
            continue
        slot = taylor_slot(f, "y_c", be)
        if slot.coeffs:
            acc = acc + jet_mul(k, slot, D)
    return (-acc).truncate(D)


@lru_cache(maxsize=64)
def _rho_cached(model, mode, xs, ys, cap, out_order):
    lay = VariableLayout(model.n, ("x", "y_c"))
    R = out_order + cap
    rho = [Jet.constant(lay, 1, R, mode=mode)]
    for m in range(1, cap + 1):
        acc = Jet.zero(lay, R - m, mode=mode)
        for j in range(1, m + 1):
            acc = acc + q_apply(model, (xs, ys), rho[m - j], j)
        rho.append(acc.truncate(R - m))
    return tuple(rho)


def rho_jets(model, base, cap: int, out_order=None) -> BergmanSymbol:
    """``rho_0..rho_cap`` by the recursion.

    Parameters
    ----------
    cap : int
        Highest level.
    out_order : int, optional
        Order to which ``rho_cap`` is known (default ``2 cap``); lower levels
        are known to correspondingly higher order.

    Examples
    --------
    >>> [int(v) for v in rho_jets("fs:0", (0, 0), 3).values()]
    [1, 1, 0, 0]
    """
    model = parse_model(model)
    xs, ys = model.check_base(base)
    out_order = 2 * cap if out_order is None else out_order
    if cap < 0 or out_order < 0:
        raise PreconditionError("cap and out_order must be non-negative")
    rho = _rho_cached(model, _mode(xs, ys), xs, ys, cap, out_order)
    return BergmanSymbol(model, (xs, ys), list(rho), out_order)


def rho_via_compositions(model, base, cap: int) -> BergmanSymbol:
    """``rho_m = sum over compositions (i_1..i_r) of m of Q_i1 ... Q_ir (1)``.

    An independent expansion of the recursion; ``2^(m-1)`` terms per level.

    Raises
    ------
    PreconditionError
        If ``cap > 8``.
    """
    if cap > 8:
        raise PreconditionError("the composition expansion is limited to cap <= 8")
    model = parse_model(model)
    xs, ys = model.check_base(base)
    lay = VariableLayout(model.n, ("x", "y_c"))
    mode = _mode(xs, ys)
    one = Jet.constant(lay, 1, cap, mode=mode)
    coeffs, counts = [one.truncate(0)], [1]
    for m in range(1, cap + 1):
        acc = Jet.zero(lay, 0, mode=mode)
        count = 0
        for comp in compositions(m):
            count += 1
            # innermost operator acts first
            g = Jet.constant(lay, 1, m, mode=mode)
            for i in reversed(comp):
                g = q_apply(model, (xs, ys), g, i)
            acc = acc + g.truncate(0)
        coeffs.append(acc)
        counts.append(count)
    return BergmanSymbol(model, (xs, ys), coeffs, 0, counts)


def bergman_growth(model, base, cap: int, kind="power"):
    """Fitted growth constant of ``rho`` at a base point (values at the base)."""
    sym = rho_jets(model, base, cap, out_order=0)
    return sym.growth(kind)


def bergman_partial_sum(model, base, eps, k: int, C_fit=None):
    """``(k / 2 pi)^n sum_{l <= floor(eps k)} rho_l k^-l`` at the base point.

    Parameters
    ----------
    eps : rational or float
        Truncation ratio; must satisfy ``eps * C_fit < 1``.
    k : int
    C_fit : float, optional
        Growth constant (factorial normalization).  Fitted from the computed
        prefix when omitted.

    Returns
    -------
    mpfr
        The truncated kernel on the diagonal (global-potential models use
        the metric frame).

    Raises
    ------
    PreconditionError
        If ``eps * C_fit >= 1``.
    """
    model = parse_model(model)
    N = floor_index(eps, k)
    sym = rho_jets(model, base, max(N, 1), out_order=0)
    vals = sym.values()[:N + 1]
    if C_fit is None:
        C_fit = fit_factorial_growth(sym.values())
    if float(eps) * C_fit >= 1:
        raise PreconditionError(f"eps * C = {float(eps) * C_fit:.4g} must be < 1")
    s = sum((v * mpq(1, k) ** ell for ell, v in enumerate(vals)), mpq(0))
    return to_float(s) * (gmpy2.mpfr(k) / (2 * gmpy2.const_pi())) ** model.n
