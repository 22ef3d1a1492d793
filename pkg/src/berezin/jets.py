"""Truncated multivariate power series (jets) in the groups x, y_c, u, v.

A :class:`Jet` stores sparse coefficients together with a description of the
region of exponents on which they are *known*.  The region is an intersection
of constraints ``sum(e[i] for i in S) <= cap_S``: the total degree cap plus
optional per-subset caps (``bounds``).  Regions are downward closed, so every
operation can report exactly which coefficients of its result are valid.

Optional ``valuations`` record that all true coefficients with
``sum(e[i] for i in S) < v_S`` vanish.  They let a product of jets be known on
a larger region than the naive intersection (for example ``a**2`` is known one
degree further than ``a`` when ``a`` has no constant term).  Operations never
extend precision beyond what the inputs justify.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as _iproduct

from gmpy2 import mpq

from . import kernels
from .errors import InsufficientOrderError, LayoutError, ModeError
from .scalars import EXACT, FLOAT, QQi, magnitude, mode_of, to_float

GROUPS = ("x", "y_c", "u", "v")

__all__ = [
    "GROUPS",
    "MultiIndex",
    "VariableLayout",
    "Jet",
    "jet_mul",
    "jet_exp",
    "jet_log1p",
    "jet_reciprocal",
    "jet_pow",
    "compose_series",
    "jet_derive",
    "delta_power_apply",
    "substitute",
    "embed",
]


class MultiIndex(tuple):
    """Tuple of non-negative exponents with an ``order`` (sum of entries)."""

    def __new__(cls, entries, nvars: int | None = None):
        entries = tuple(int(e) for e in entries)
        if any(e < 0 for e in entries):
            raise ValueError("multi-index entries must be non-negative")
        if nvars is not None and len(entries) != nvars:
            raise LayoutError(f"multi-index has {len(entries)} entries, layout has {nvars}")
        return super().__new__(cls, entries)

    @property
    def order(self) -> int:
        return sum(self)

    def factorial(self) -> int:
        out = 1
        for e in self:
            out *= math.factorial(e)
        return out


@dataclass(frozen=True)
class VariableLayout:
    """Ordered variable groups, each holding ``n`` variables.

    Parameters
    ----------
    n : int
        Complex dimension (variables per group).
    groups : tuple of str
        Subset of ``("x", "y_c", "u", "v")`` in canonical order.
    """

    n: int
    groups: tuple = GROUPS

    def __post_init__(self):
        if self.n < 1:
            raise LayoutError("dimension must be >= 1")
        groups = tuple(self.groups)
        if len(set(groups)) != len(groups):
            raise LayoutError(f"duplicate group names in {groups}")
        bad = [g for g in groups if g not in GROUPS]
        if bad:
            raise LayoutError(f"unknown groups {bad}")
        # canonical ordering keeps layouts comparable
        object.__setattr__(self, "groups", tuple(g for g in GROUPS if g in groups))

    @property
    def nvars(self) -> int:
        return self.n * len(self.groups)

    def group_indices(self, name: str) -> tuple:
        if name not in self.groups:
            raise LayoutError(f"group {name!r} absent from layout {self.groups}")
        k = self.groups.index(name)
        return tuple(range(k * self.n, (k + 1) * self.n))

    def indices(self, names) -> tuple:
        out = []
        for g in names:
            out.extend(self.group_indices(g))
        return tuple(out)

    def var_name(self, i: int) -> str:
        g = self.groups[i // self.n]
        return g if self.n == 1 else f"{g}{i % self.n}"

    def index(self, var) -> int:
        """Resolve ``var`` (index, ``"u"``, ``"u1"``, or ``("u", 1)``) to a position."""
        if isinstance(var, int) and not isinstance(var, bool):
            if 0 <= var < self.nvars:
                return var
            raise LayoutError(f"variable index {var} out of range")
        if isinstance(var, tuple) and len(var) == 2:
            g, i = var
            idx = self.group_indices(g)
            if not 0 <= i < self.n:
                raise LayoutError(f"variable {var!r} out of range")
            return idx[i]
        if isinstance(var, str):
            if var in self.groups:
                if self.n != 1:
                    raise LayoutError(f"group {var!r} has {self.n} variables; give an index")
                return self.group_indices(var)[0]
            for g in sorted(self.groups, key=len, reverse=True):
                if var.startswith(g):
                    rest = var[len(g):].lstrip("_")
                    if rest.isdigit():
                        return self.index((g, int(rest)))
        raise LayoutError(f"unknown variable {var!r} for layout {self.groups}")

    def without(self, names) -> "VariableLayout":
        return VariableLayout(self.n, tuple(g for g in self.groups if g not in names))


# -- regions ---------------------------------------------------------------

def _norm_bounds(nvars, cap, bounds):
    allidx = tuple(range(nvars))
    merged = {}
    for idx, c in bounds:
        idx = tuple(sorted(set(idx)))
        c = int(c)
        if not idx:
            if c < 0:
                cap = min(cap, -1)
            continue
        if idx == allidx:
            cap = min(cap, c)
            continue
        merged[idx] = min(merged.get(idx, c), c)
    return cap, tuple(sorted((i, c) for i, c in merged.items() if c < cap))


def _norm_vals(nvars, vals):
    merged = {}
    for idx, v in vals:
        idx = tuple(sorted(set(idx)))
        if idx and v > 0:
            merged[idx] = max(merged.get(idx, 0), int(v))
    return tuple(sorted(merged.items()))


def _val_on(S, vals) -> int:
    """Best known lower bound for sum_{i in S} e_i over the true support."""
    s = set(S)
    best = 0
    for idx, v in vals:
        if set(idx) <= s and v > best:
            best = v
    return best


def _in_region(key, cap, bounds) -> bool:
    if sum(key) > cap:
        return False
    for idx, c in bounds:
        if sum(key[i] for i in idx) > c:
            return False
    return True


def _bound_on(S, cap, bounds, nvars):
    """Cap on sum_S implied directly by a region (``None`` if unconstrained)."""
    S = tuple(sorted(S))
    if S == tuple(range(nvars)):
        return cap
    best = None
    for idx, c in bounds:
        if set(S) <= set(idx):
            best = c if best is None else min(best, c)
    return best


def _coerce(c, mode):
    if isinstance(c, bool):
        c = int(c)
    if mode == EXACT:
        if isinstance(c, (int, Fraction)):
            return mpq(c)
        if isinstance(c, QQi) and c.im == 0:
            return c.re
        return c
    m = mode_of(c)
    return to_float(c) if m == EXACT or isinstance(c, (float, complex)) else c


class Jet:
    """Truncated power series with an explicit known region.

    Parameters
    ----------
    layout : VariableLayout
    coeffs : dict
        Exponent tuple -> scalar.  Entries outside the region are dropped.
    cap : int
        Maximum total degree retained.
    bounds : iterable of (indices, int), optional
        Extra caps on partial degree sums.
    valuations : iterable of (indices, int), optional
        Known lower bounds on partial degrees of the true support.
    mode : {"exact", "float"}, optional
        Inferred from the coefficients when omitted.
    """

    __slots__ = ("layout", "cap", "bounds", "valuations", "coeffs", "mode")

    def __init__(self, layout, coeffs=None, cap=0, bounds=(), valuations=(), mode=None, _trusted=False):
        self.layout = layout
        nv = layout.nvars
        self.cap, self.bounds = _norm_bounds(nv, int(cap), bounds)
        self.valuations = _norm_vals(nv, valuations)
        coeffs = coeffs or {}
        if _trusted:
            self.coeffs = coeffs
            self.mode = mode or EXACT
            return
        if mode is None:
            modes = {mode_of(c) for c in coeffs.values()}
            if len(modes) > 1:
                raise ModeError("mixed exact and float coefficients in one jet")
            mode = modes.pop() if modes else EXACT
        elif mode == EXACT and any(mode_of(c) == FLOAT for c in coeffs.values()):
            raise ModeError("float coefficient in an exact jet")
        self.mode = mode
        out = {}
        for k, c in coeffs.items():
            k = tuple(k)
            if len(k) != nv:
                raise LayoutError(f"exponent {k} does not match {nv} variables")
            if c == 0 or not _in_region(k, self.cap, self.bounds):
                continue
            out[k] = _coerce(c, mode)
        self.coeffs = out

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, layout, cap, bounds=(), mode=EXACT):
        return cls(layout, {}, cap, bounds, mode=mode)

    @classmethod
    def constant(cls, layout, c, cap, mode=None):
        return cls(layout, {(0,) * layout.nvars: c}, cap, mode=mode)

    @classmethod
    def variable(cls, layout, var, cap, mode=EXACT):
        i = layout.index(var)
        key = tuple(1 if j == i else 0 for j in range(layout.nvars))
        return cls(layout, {key: 1}, cap, valuations=[((i,), 1)], mode=mode)

    @classmethod
    def monomial(cls, layout, exps, cap, coeff=1, mode=None):
        exps = tuple(exps)
        vals = [((i,), e) for i, e in enumerate(exps) if e]
        return cls(layout, {exps: coeff}, cap, valuations=vals, mode=mode)

    # -- basic properties ----------------------------------------------------
    def constraints(self):
        """Region as a list of ``(indices, cap)`` including the total cap."""
        return [(tuple(range(self.layout.nvars)), self.cap)] + list(self.bounds)

    def contains(self, key) -> bool:
        return _in_region(tuple(key), self.cap, self.bounds)

    @property
    def empty_region(self) -> bool:
        return self.cap < 0 or any(c < 0 for _, c in self.bounds)

    def __getitem__(self, key):
        key = tuple(key)
        if not self.contains(key):
            raise InsufficientOrderError(
                f"coefficient {key} lies outside the known region (cap {self.cap}, bounds {self.bounds})",
                required=sum(key), available=self.cap)
        return self.coeffs.get(key, mpq(0) if self.mode == EXACT else to_float(0))

    def value(self):
        """Constant term (the value at the base point)."""
        return self[(0,) * self.layout.nvars]

    def items(self):
        return self.coeffs.items()

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"Jet({self.layout.groups}, n={self.layout.n}, cap={self.cap}, terms={len(self.coeffs)}, {self.mode})"

    def max_abs(self) -> float:
        """Max coefficient magnitude (the jet norm proxy)."""
        return max((magnitude(c) for c in self.coeffs.values()), default=0.0)

    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=-1)

    def to_float(self) -> "Jet":
        if self.mode == FLOAT:
            return self
        return Jet(self.layout, {k: to_float(c) for k, c in self.coeffs.items()}, self.cap,
                   self.bounds, self.valuations, mode=FLOAT)

    def conj_coeffs(self) -> "Jet":
        from .scalars import conj
        return self._replace({k: conj(c) for k, c in self.coeffs.items()})

    def _replace(self, coeffs, cap=None, bounds=None, valuations=None):
        return Jet(self.layout, coeffs, self.cap if cap is None else cap,
                   self.bounds if bounds is None else bounds,
                   self.valuations if valuations is None else valuations, mode=self.mode)

    def truncate(self, cap=None, bounds=()) -> "Jet":
        """Shrink the known region (never enlarges it)."""
        cap = self.cap if cap is None else min(cap, self.cap)
        return self._replace(self.coeffs, cap=cap, bounds=list(self.bounds) + list(bounds))

    def evaluate(self, point):
        """Numeric value of the stored polynomial at ``point`` (complex)."""
        from .scalars import to_complex
        pt = [complex(p) for p in point]
        total = 0j
        for k, c in self.coeffs.items():
            term = to_complex(c)
            for p, e in zip(pt, k):
                if e:
                    term *= p ** e
            total += term
        return total

    # -- comparisons ---------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, Jet):
            raise TypeError("expected a Jet")
        if other.layout != self.layout:
            raise LayoutError(f"layout mismatch: {self.layout} vs {other.layout}")
        if other.mode != self.mode:
            raise ModeError(f"mode mismatch: {self.mode} vs {other.mode}")

    def agrees(self, other, tol=None) -> bool:
        """Equality on the common known region (within ``tol`` in float mode)."""
        self._check(other)
        cap, bounds = _norm_bounds(self.layout.nvars, min(self.cap, other.cap),
                                   list(self.bounds) + list(other.bounds))
        zero = mpq(0)
        for k in set(self.coeffs) | set(other.coeffs):
            if not _in_region(k, cap, bounds):
                continue
            d = self.coeffs.get(k, zero) - other.coeffs.get(k, zero)
            if tol is None:
                if d != 0:
                    return False
            elif magnitude(d) > tol:
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        if other.layout != self.layout or other.mode != self.mode:
            return False
        return self.agrees(other)

    __hash__ = None

    # -- ring operations ---------------------------------------------------
    def _linear(self, other, sign):
        if not isinstance(other, Jet):
            other = Jet.constant(self.layout, other, self.cap, mode=self.mode)
        self._check(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            v = out.get(k)
            c = c if sign > 0 else -c
            out[k] = c if v is None else v + c
        vals = [(S, min(v, _val_on(S, other.valuations))) for S, v in self.valuations]
        return Jet(self.layout, out, min(self.cap, other.cap), list(self.bounds) + list(other.bounds),
                   vals, mode=self.mode)

    def __add__(self, other):
        return self._linear(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._linear(other, -1)

    def __rsub__(self, other):
        return (-self)._linear(other, 1)

    def __neg__(self):
        return self._replace({k: -c for k, c in self.coeffs.items()})

    def scale(self, s) -> "Jet":
        s = _coerce(s, self.mode)
        if s == 0:
            return self._replace({}, valuations=())
        return self._replace({k: s * c for k, c in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, s):
        if isinstance(s, Jet):
            return jet_mul(self, jet_reciprocal(s))
        return self.scale(1 / _coerce(s, self.mode))

    def __pow__(self, k: int):
        return jet_pow(self, k)

    def derive(self, var) -> "Jet":
        return jet_derive(self, var)

    # -- group extraction ----------------------------------------------------
    def _extract_region(self, groups, exps):
        lay = self.layout
        fixed = lay.indices([g for g in lay.groups if g in groups])
        exps = tuple(exps)
        if len(exps) != len(fixed):
            raise LayoutError(f"expected {len(fixed)} exponents, got {len(exps)}")
        fmap = dict(zip(fixed, exps))
        kept = [i for i in range(lay.nvars) if i not in fmap]
        pos = {i: j for j, i in enumerate(kept)}
        cons = []
        for idx, c in self.constraints():
            rest = c - sum(fmap.get(i, 0) for i in idx)
            if rest < 0:
                raise InsufficientOrderError(
                    f"coefficient {exps} of {tuple(groups)} is outside the known region",
                    required=sum(exps), available=c)
            ki = [pos[i] for i in idx if i in pos]
            if ki:
                cons.append((ki, rest))
        total = tuple(range(len(kept)))
        cap = min([c for ki, c in cons if tuple(ki) == total], default=self.cap - sum(exps))
        vals = [([pos[i] for i in idx], v) for idx, v in self.valuations
                if not any(i in fmap for i in idx)]
        return fixed, kept, cap, cons, vals

    def extract(self, groups, exps) -> "Jet":
        """Coefficient of a fixed monomial in ``groups``, as a jet in the rest.

        Parameters
        ----------
        groups : sequence of str
            Groups whose variables are fixed.
        exps : sequence of int
            Exponents for the variables of ``groups`` (in layout order).

        Raises
        ------
        InsufficientOrderError
            If the monomial lies outside the known region.
        """
        fixed, kept, cap, cons, vals = self._extract_region(groups, exps)
        exps = tuple(exps)
        out = {}
        for k, c in self.coeffs.items():
            if tuple(k[i] for i in fixed) == exps:
                out[tuple(k[i] for i in kept)] = c
        return Jet(self.layout.without(groups), out, cap, cons, vals, mode=self.mode)

    def split(self, groups):
        """Map from stored monomials in ``groups`` to coefficient jets in the rest."""
        lay = self.layout
        fixed = lay.indices([g for g in lay.groups if g in groups])
        fset = set(fixed)
        kept = [i for i in range(lay.nvars) if i not in fset]
        buckets = {}
        for k, c in self.coeffs.items():
            buckets.setdefault(tuple(k[i] for i in fixed), {})[tuple(k[i] for i in kept)] = c
        new_lay = lay.without(groups)
        out = {}
        for e, coeffs in sorted(buckets.items()):
            _, _, cap, cons, vals = self._extract_region(groups, e)
            out[e] = Jet(new_lay, coeffs, cap, cons, vals, mode=self.mode)
        return out


# -- products and series ----------------------------------------------------

def _product_region(a: Jet, b: Jet):
    cons = []
    for idx, c in a.constraints():
        cons.append((idx, c + _val_on(idx, b.valuations)))
    for idx, c in b.constraints():
        cons.append((idx, c + _val_on(idx, a.valuations)))
    return cons


def jet_mul(a: Jet, b: Jet, cap=None, bounds=()) -> Jet:
    """Product of two jets truncated to total degree ``cap`` (and ``bounds``).

    The result's known region is the requested one intersected with what the
    inputs justify.

    Raises
    ------
    LayoutError, ModeError
        On layout or arithmetic-mode mismatch.
    """
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        raise TypeError("jet_mul expects two jets")
    a._check(b)
    nv = a.layout.nvars
    cons = _product_region(a, b)
    if cap is not None:
        cons.append((tuple(range(nv)), cap))
    cons.extend(bounds)
    tcap = min(c for idx, c in cons if tuple(sorted(idx)) == tuple(range(nv)))
    tcap, bnds = _norm_bounds(nv, tcap, cons)
    vals = {}
    for S in {idx for idx, _ in a.valuations} | {idx for idx, _ in b.valuations}:
        vals[S] = _val_on(S, a.valuations) + _val_on(S, b.valuations)
    if tcap < 0 or any(c < 0 for _, c in bnds):
        coeffs = {}
    else:
        coeffs = kernels.mul(a.coeffs, b.coeffs, [(tuple(range(nv)), tcap)] + list(bnds), nv)
    return Jet(a.layout, coeffs, tcap, bnds, list(vals.items()), mode=a.mode, _trusted=True)


def compose_series(a: Jet, coeffs, cap=None) -> Jet:
    """``sum_m coeffs[m] * a**m`` for ``a`` with zero constant term.

    ``coeffs`` is a sequence (or a callable ``m -> coefficient``); terms stop
    once a power falls outside the region.
    """
    if a.value() != 0:
        raise ValueError("series composition needs a jet with zero constant term")
    nv = a.layout.nvars
    cap = a.cap if cap is None else min(cap, a.cap)
    base = a.truncate(cap)
    base = Jet(base.layout, base.coeffs, base.cap, base.bounds,
               list(base.valuations) + [(tuple(range(nv)), 1)], mode=a.mode, _trusted=True)
    get = coeffs if callable(coeffs) else (lambda m: coeffs[m] if m < len(coeffs) else 0)
    out = Jet.constant(a.layout, get(0), cap, mode=a.mode)
    power = base
    m = 1
    while power.coeffs and m <= cap:
        cm = get(m)
        if cm:
            out = out + power.scale(cm)
        m += 1
        power = jet_mul(power, base, cap)
    # the region of the sum is that of a itself (the m = 1 term)
    return out.truncate(cap, base.bounds)


def jet_exp(a: Jet, cap=None) -> Jet:
    """Exponential of a jet with zero constant term.

    Raises
    ------
    ValueError
        If the constant term is nonzero.
    """
    if a.value() != 0:
        raise ValueError("jet_exp requires a zero constant term")
    return compose_series(a, lambda m: mpq(1, math.factorial(m)), cap)


def jet_log1p(a: Jet, cap=None) -> Jet:
    """``log(1 + a)`` for ``a`` with zero constant term."""
    return compose_series(a, lambda m: mpq((-1) ** (m + 1), m) if m else 0, cap)


def jet_binomial(a: Jet, s, cap=None) -> Jet:
    """``(1 + a)**s`` for rational ``s`` and ``a`` with zero constant term."""
    s = mpq(s)

    def coef(m):
        out = mpq(1)
        for j in range(m):
            out *= (s - j) / (j + 1)
        return out

    return compose_series(a, coef, cap)


def jet_reciprocal(a: Jet, cap=None) -> Jet:
    """Multiplicative inverse of a jet with invertible constant term."""
    c0 = a.value()
    if c0 == 0:
        raise ZeroDivisionError("jet has zero constant term")
    inv0 = 1 / c0
    t = a.scale(inv0) - 1
    return compose_series(t, lambda m: (-1) ** m, cap).scale(inv0)


def jet_pow(a: Jet, k: int, cap=None) -> Jet:
    if k < 0:
        return jet_pow(jet_reciprocal(a, cap), -k, cap)
    out = Jet.constant(a.layout, 1, a.cap if cap is None else cap, mode=a.mode)
    if cap is not None:
        a = a.truncate(cap)
    base = a
    while k:
        if k & 1:
            out = jet_mul(out, base, cap)
        k >>= 1
        if k:
            base = jet_mul(base, base, cap)
    return out


# -- calculus ------------------------------------------------------------------

def jet_derive(a: Jet, var) -> Jet:
    """Formal partial derivative; the known region shrinks by one in ``var``.

    Raises
    ------
    LayoutError
        If ``var`` is not a variable of the layout.
    """
    i = a.layout.index(var)
    out = {}
    for k, c in a.coeffs.items():
        e = k[i]
        if e:
            nk = k[:i] + (e - 1,) + k[i + 1:]
            out[nk] = c * e
    bounds = [(idx, c - 1 if i in idx else c) for idx, c in a.bounds]
    vals = [(idx, v - 1 if i in idx else v) for idx, v in a.valuations]
    return Jet(a.layout, out, a.cap - 1, bounds, vals, mode=a.mode, _trusted=True)


def delta_power_apply(a: Jet, ginv, m: int) -> Jet:
    """Apply ``(sum_ij ginv[i][j] d/du_i d/dv_j)**m`` to ``a``.

    Raises
    ------
    LayoutError
        If ``ginv`` is not ``n x n`` or ``a`` lacks the u or v group.
    """
    n = a.layout.n
    if len(ginv) != n or any(len(row) != n for row in ginv):
        raise LayoutError(f"ginv must be {n}x{n}")
    uidx = a.layout.group_indices("u")
    vidx = a.layout.group_indices("v")
    out = a
    for _ in range(m):
        acc = None
        for i in range(n):
            for j in range(n):
                gij = ginv[i][j]
                if gij == 0:
                    continue
                term = jet_derive(jet_derive(out, uidx[i]), vidx[j]).scale(gij)
                acc = term if acc is None else acc + term
        if acc is None:
            acc = jet_derive(jet_derive(out, uidx[0]), vidx[0]).scale(0)
        out = acc
    return out


# -- substitutions -------------------------------------------------------------

def _splits(e, parts):
    """All ways to write ``e`` as an ordered sum of ``parts`` non-negative ints."""
    if parts == 1:
        yield (e,)
        return
    for first in range(e + 1):
        for rest in _splits(e - first, parts - 1):
            yield (first,) + rest


def substitute(a: Jet, layout: VariableLayout, mapping, cap=None) -> Jet:
    """Linear substitution ``old_j -> sum of new variables in mapping[j]``.

    Parameters
    ----------
    a : Jet
    layout : VariableLayout
        Target layout.
    mapping : dict
        Old variable index -> tuple of new variable indices.  Images must be
        pairwise disjoint.
    cap : int, optional
        Total cap of the result (defaults to ``a.cap``).
    """
    nv_old = a.layout.nvars
    images = [tuple(mapping.get(j, ())) for j in range(nv_old)]
    seen = set()
    for im in images:
        if seen & set(im):
            raise LayoutError("substitution images must be disjoint")
        seen |= set(im)
    nv = layout.nvars
    out = {}
    for k, c in a.coeffs.items():
        if any(e and not images[j] for j, e in enumerate(k)):
            continue
        choices = []
        for j, e in enumerate(k):
            im = images[j]
            if not im:
                continue
            opts = []
            for parts in _splits(e, len(im)):
                mult = math.factorial(e)
                for p in parts:
                    mult //= math.factorial(p)
                opts.append((im, parts, mult))
            choices.append(opts)
        for combo in _iproduct(*choices):
            key = [0] * nv
            mult = 1
            for im, parts, mu in combo:
                for i, p in zip(im, parts):
                    key[i] += p
                mult *= mu
            key = tuple(key)
            v = out.get(key)
            term = c * mult
            out[key] = term if v is None else v + term
    def img(idx):
        return tuple(sorted(i for j in idx for i in images[j]))
    cons = [(img(idx), c) for idx, c in a.constraints() if img(idx)]
    vals = [(img(idx), v) for idx, v in a.valuations if img(idx)]
    tcap = a.cap if cap is None else cap
    return Jet(layout, out, tcap, cons, vals, mode=a.mode)


def embed(a: Jet, layout: VariableLayout, cap=None) -> Jet:
    """Embed ``a`` into a layout containing all of its groups (constant in the rest)."""
    n = a.layout.n
    if layout.n != n:
        raise LayoutError("dimension mismatch in embed")
    mapping = {}
    for g in a.layout.groups:
        for o, t in zip(a.layout.group_indices(g), layout.group_indices(g)):
            mapping[o] = (t,)
    return substitute(a, layout, mapping, cap)


def shift(a: Jet, layout: VariableLayout, shifts, cap=None, bounds=()) -> Jet:
    """Substitute ``g -> g + h`` for group pairs in ``shifts`` (e.g. {"x": "u"}).

    ``a`` lives on a sub-layout of ``layout``; groups not in ``shifts`` embed
    unchanged.  ``bounds`` shrink the result region and prune the expansion.
    """
    nv = layout.nvars
    src_pos, dst_pos = [], []  # per old variable: kept target, shifted target
    for g in a.layout.groups:
        tg = layout.group_indices(g)
        hg = layout.group_indices(shifts[g]) if shifts.get(g) else None
        for i in range(a.layout.n):
            src_pos.append(tg[i])
            dst_pos.append(hg[i] if hg is not None else None)
    images = [((t,) if h is None else (t, h)) for t, h in zip(src_pos, dst_pos)]

    def img(idx):
        return tuple(sorted(i for j in idx for i in images[j]))

    cons = [(img(idx), c) for idx, c in a.constraints()]
    tcap = a.cap if cap is None else cap
    cons.append((tuple(range(nv)), tcap))
    cons.extend(bounds)
    tcap, bnds = _norm_bounds(nv, tcap, cons)
    kept_set = set(src_pos)
    kept_cons = [(idx, c) for idx, c in bnds if set(idx) <= kept_set]
    binom = math.comb
    out = {}
    nold = a.layout.nvars
    for k, c in a.coeffs.items():
        ranges = [range(k[j] + 1) if dst_pos[j] is not None else (k[j],) for j in range(nold)]
        for kept in _iproduct(*ranges):
            key = [0] * nv
            for j in range(nold):
                key[src_pos[j]] = kept[j]
            if any(sum(key[i] for i in idx) > cc for idx, cc in kept_cons):
                continue
            mult = 1
            for j in range(nold):
                if dst_pos[j] is not None:
                    rest = k[j] - kept[j]
                    key[dst_pos[j]] = rest
                    if rest:
                        mult *= binom(k[j], rest)
            key = tuple(key)
            if not _in_region(key, tcap, bnds):
                continue
            term = c * mult
            v = out.get(key)
            out[key] = term if v is None else v + term
    vals = [(img(idx), v) for idx, v in a.valuations]
    return Jet(layout, out, tcap, bnds, vals, mode=a.mode)


def monomial_mul(a: Jet, exps) -> Jet:
    """Multiply by the monomial with exponent vector ``exps``.

    The known region moves up with the monomial.
    """
    exps = tuple(exps)
    out = {tuple(x + y for x, y in zip(k, exps)): c for k, c in a.coeffs.items()}
    tot = sum(exps)
    bounds = [(idx, c + sum(exps[i] for i in idx)) for idx, c in a.bounds]
    vals = [(idx, v + sum(exps[i] for i in idx)) for idx, v in a.valuations]
    vals += [((i,), e) for i, e in enumerate(exps) if e]
    return Jet(a.layout, out, a.cap + tot, bounds, vals, mode=a.mode, _trusted=True)


def from_polynomial(layout: VariableLayout, terms, cap, mode=None) -> Jet:
    """Build a jet from ``{exponent tuple: coeff}`` with valuations read off."""
    terms = {tuple(k): v for k, v in terms.items() if v != 0}
    return Jet(layout, terms, cap, mode=mode)


def QQ(x) -> mpq:
    """Shorthand for an exact rational."""
    return mpq(x)


__all__ += ["shift", "monomial_mul", "from_polynomial", "jet_binomial", "QQi"]
