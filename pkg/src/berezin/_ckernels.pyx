# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled truncated sparse jet multiplication.

Same contract as :func:`berezin._kernels_py.mul`.  Exponent tuples are packed
into 64-bit integers.  When every coefficient is an ``mpq`` the convolution
runs on raw GMP rationals; other scalar types go through a generic path that
still packs keys and filters degree groups in C.
"""
from libc.stdint cimport int64_t
from libc.stdlib cimport malloc, free, realloc
from libcpp.unordered_map cimport unordered_map
from cpython.ref cimport PyObject

from gmpy2 cimport *

cdef extern from "gmp.h":
    void mpq_init(mpq_ptr x)
    void mpq_clear(mpq_ptr x)
    void mpq_mul(mpq_ptr r, mpq_srcptr a, mpq_srcptr b)
    void mpq_add(mpq_ptr r, mpq_srcptr a, mpq_srcptr b)
    int mpq_sgn(mpq_srcptr x)

import_gmpy2()

BACKEND = "cython"

from . import _kernels_py


cdef _groups(dict terms, list constraints, int width, bint want_mpq):
    """Pack keys and bucket terms by their constraint degree vector."""
    cdef dict buckets = {}
    cdef int64_t packed
    cdef int i, e
    for key, c in terms.items():
        deg = tuple([sum([key[j] for j in idx]) for idx, _ in constraints])
        packed = 0
        for i in range(len(key)):
            e = key[i]
            packed |= (<int64_t>e) << (i * width)
        buckets.setdefault(deg, []).append((packed, c))
    return buckets


def mul(dict a, dict b, constraints, int nvars):
    if not a or not b:
        return {}
    constraints = list(constraints)
    cdef int ncons = len(constraints)
    cdef int total = 0
    for _, cap in constraints:
        if cap > total:
            total = cap
    cdef int width = max(1, int(total).bit_length())
    if nvars * width > 62:
        return _kernels_py.mul(a, b, constraints, nvars)
    cdef bint all_q = True
    mpq_type = type(GMPy_MPQ_New(NULL))
    for v in a.values():
        if type(v) is not mpq_type:
            all_q = False
            break
    if all_q:
        for v in b.values():
            if type(v) is not mpq_type:
                all_q = False
                break
    caps = [c for _, c in constraints]
    ga = _groups(a, constraints, width, all_q)
    gb = _groups(b, constraints, width, all_q)
    # filter group pairs at Python level: few groups, many terms
    pairs = []
    for da, aterms in ga.items():
        if any([x > c for x, c in zip(da, caps)]):
            continue
        room = [c - x for x, c in zip(da, caps)]
        bl = [bt for db, bt in gb.items() if all([y <= r for y, r in zip(db, room)])]
        if bl:
            pairs.append((aterms, bl))
    if all_q:
        packed = _mul_mpq(pairs)
    else:
        packed = _mul_obj(pairs)
    cdef int64_t mask = (<int64_t>1 << width) - 1
    cdef int64_t k
    out = {}
    for kk, v in packed:
        k = kk
        out[tuple([(k >> (i * width)) & mask for i in range(nvars)])] = v
    return out


cdef list _mul_mpq(list pairs):
    cdef unordered_map[int64_t, int] index
    cdef int cap = 64, n = 0, pos
    cdef __mpq_struct *acc = <__mpq_struct *>malloc(cap * sizeof(__mpq_struct))
    cdef __mpq_struct tmp
    cdef int64_t ka, kb, key
    cdef mpq qa, qb
    mpq_init(&tmp)
    try:
        for aterms, blists in pairs:
            for ka_obj, qa in aterms:
                ka = ka_obj
                for bterms in blists:
                    for kb_obj, qb in bterms:
                        key = ka + <int64_t>kb_obj
                        it = index.find(key)
                        if it == index.end():
                            if n == cap:
                                cap *= 2
                                acc = <__mpq_struct *>realloc(acc, cap * sizeof(__mpq_struct))
                            mpq_init(&acc[n])
                            mpq_mul(&acc[n], MPQ(qa), MPQ(qb))
                            index[key] = n
                            n += 1
                        else:
                            pos = index[key]
                            mpq_mul(&tmp, MPQ(qa), MPQ(qb))
                            mpq_add(&acc[pos], &acc[pos], &tmp)
        result = []
        for item in index:
            pos = item.second
            if mpq_sgn(&acc[pos]) != 0:
                r = GMPy_MPQ_New(NULL)
                mpq_set(MPQ(r), &acc[pos])
                result.append((item.first, r))
        return result
    finally:
        mpq_clear(&tmp)
        for pos in range(n):
            mpq_clear(&acc[pos])
        free(acc)


cdef list _mul_obj(list pairs):
    cdef unordered_map[int64_t, int] index
    cdef list vals = []
    cdef list keys = []
    cdef int64_t ka, key
    cdef int pos
    for aterms, blists in pairs:
        for ka_obj, ca in aterms:
            ka = ka_obj
            for bterms in blists:
                for kb_obj, cb in bterms:
                    key = ka + <int64_t>kb_obj
                    it = index.find(key)
                    if it == index.end():
                        index[key] = len(vals)
                        vals.append(ca * cb)
                        keys.append(key)
                    else:
                        pos = index[key]
                        vals[pos] = vals[pos] + ca * cb
    return [(k, v) for k, v in zip(keys, vals) if v != 0]
