"""Pure-Python reference kernel for truncated sparse jet multiplication.

A truncation region is a list of ``(indices, cap)`` constraints: a monomial
with exponent vector ``e`` is kept iff ``sum(e[i] for i in indices) <= cap``
for every constraint.  All constraints are additive, so the product of two
jets is exact on the intersection of their regions.
"""
from __future__ import annotations

BACKEND = "python"


def _degrees(key, constraints):
    return tuple(sum(key[i] for i in idx) for idx, _ in constraints)


def _group(terms, constraints):
    groups = {}
    for key, c in terms.items():
        groups.setdefault(_degrees(key, constraints), []).append((key, c))
    return groups


def mul(a: dict, b: dict, constraints, nvars: int) -> dict:
    """Truncated product of two sparse coefficient maps.

    Parameters
    ----------
    a, b : dict
        Maps from exponent tuples (length ``nvars``) to scalars.
    constraints : sequence of (tuple of int, int)
        Truncation region of the result.
    nvars : int
        Number of variables.

    Returns
    -------
    dict
        Product coefficients inside the region, zeros dropped.
    """
    if not a or not b:
        return {}
    caps = tuple(c for _, c in constraints)
    ga = _group(a, constraints)
    gb = _group(b, constraints)
    out = {}
    for da, aterms in ga.items():
        if any(x > c for x, c in zip(da, caps)):
            continue
        room = tuple(c - x for x, c in zip(da, caps))
        for db, bterms in gb.items():
            if any(y > r for y, r in zip(db, room)):
                continue
            for ka, ca in aterms:
                for kb, cb in bterms:
                    k = tuple(x + y for x, y in zip(ka, kb))
                    v = out.get(k)
                    out[k] = ca * cb if v is None else v + ca * cb
    return {k: v for k, v in out.items() if v != 0}
