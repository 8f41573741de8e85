# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled right-hand-side kernels for the mean-field hierarchy.

Loop-based twins of the vectorized numpy implementation, operating directly
on the packed canonical tensors (no full redundant arrays).  Closure products
are inlined.  These kernels win below a few dozen atoms where per-call numpy
overhead dominates; the BLAS-backed numpy path takes over for large arrays.
"""

import numpy as np

cimport numpy as cnp

ctypedef double complex cplx
ctypedef cnp.int64_t idx_t

DEF IM = 0
DEF IZ = 1
DEF IP = 2


cdef inline cplx pget(const cplx[:, :, ::1] pairs, const idx_t[:, ::1] pid,
                      Py_ssize_t a, Py_ssize_t b, int ja, int jb):
    if a < b:
        return pairs[pid[a, b], ja, jb]
    return pairs[pid[b, a], jb, ja]


cdef inline cplx tget(const cplx[:, :, :, ::1] triples, const idx_t[:, :, ::1] tid,
                      Py_ssize_t a, Py_ssize_t b, Py_ssize_t c,
                      int ja, int jb, int jc):
    cdef Py_ssize_t t
    cdef int tj
    if a > b:
        t = a; a = b; b = t
        tj = ja; ja = jb; jb = tj
    if b > c:
        t = b; b = c; c = t
        tj = jb; jb = jc; jc = tj
    if a > b:
        t = a; a = b; b = t
        tj = ja; ja = jb; jb = tj
    return triples[tid[a, b, c], ja, jb, jc]


cdef inline cplx closure3(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs,
                          const idx_t[:, ::1] pid,
                          Py_ssize_t a1, Py_ssize_t a2, Py_ssize_t a3,
                          int j1, int j2, int j3):
    """Triple value from pairs and singles with the third cumulant set to 0."""
    return (pget(pairs, pid, a1, a2, j1, j2) * s[a3, j3]
            + pget(pairs, pid, a1, a3, j1, j3) * s[a2, j2]
            + pget(pairs, pid, a2, a3, j2, j3) * s[a1, j1]
            - 2.0 * s[a1, j1] * s[a2, j2] * s[a3, j3])


cdef inline cplx closure4(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs,
                          const cplx[:, :, :, ::1] triples,
                          const idx_t[:, ::1] pid, const idx_t[:, :, ::1] tid,
                          Py_ssize_t a1, Py_ssize_t a2, Py_ssize_t a3,
                          Py_ssize_t a4, int j1, int j2, int j3, int j4):
    """Quadruple value with the fourth cumulant set to zero (order-3 closure)."""
    cdef cplx s1 = s[a1, j1], s2 = s[a2, j2], s3 = s[a3, j3], s4 = s[a4, j4]
    cdef cplx p12 = pget(pairs, pid, a1, a2, j1, j2)
    cdef cplx p13 = pget(pairs, pid, a1, a3, j1, j3)
    cdef cplx p14 = pget(pairs, pid, a1, a4, j1, j4)
    cdef cplx p23 = pget(pairs, pid, a2, a3, j2, j3)
    cdef cplx p24 = pget(pairs, pid, a2, a4, j2, j4)
    cdef cplx p34 = pget(pairs, pid, a3, a4, j3, j4)
    cdef cplx val
    val = (tget(triples, tid, a1, a2, a3, j1, j2, j3) * s4
           + tget(triples, tid, a1, a2, a4, j1, j2, j4) * s3
           + tget(triples, tid, a1, a3, a4, j1, j3, j4) * s2
           + tget(triples, tid, a2, a3, a4, j2, j3, j4) * s1)
    val += p12 * p34 + p13 * p24 + p14 * p23
    val -= 2.0 * (p12 * s3 * s4 + p13 * s2 * s4 + p14 * s2 * s3
                  + p23 * s1 * s4 + p24 * s1 * s3 + p34 * s1 * s2)
    val += 6.0 * s1 * s2 * s3 * s4
    return val


cdef void _order1_impl(const cplx[:, ::1] s, const cplx[:, :, ::1] w, const cplx[:, ::1] src,
               const cplx[:, ::1] gp, const cplx[:, ::1] gm, cplx[:, ::1] ds,
               int repeats):
    cdef Py_ssize_t n_atoms = s.shape[0]
    cdef Py_ssize_t n, l
    cdef int a, b, _rep
    cdef cplx acc
    for _rep in range(repeats):
        for n in range(n_atoms):
            for a in range(3):
                acc = src[n, a]
                for b in range(3):
                    acc = acc + w[n, a, b] * s[n, b]
                for l in range(n_atoms):
                    if l == n:
                        continue
                    if a == IM:
                        acc = acc - gp[n, l] * s[l, IM]
                        acc = acc + 2.0 * gp[n, l] * s[n, IZ] * s[l, IM]
                    elif a == IP:
                        acc = acc - gm[n, l] * s[l, IP]
                        acc = acc + 2.0 * gm[n, l] * s[n, IZ] * s[l, IP]
                    else:
                        acc = acc - gp[n, l] * s[n, IP] * s[l, IM]
                        acc = acc - gm[n, l] * s[n, IM] * s[l, IP]
                ds[n, a] = acc


cdef void _singles_stored(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs,
                          const idx_t[:, ::1] pid, const cplx[:, :, ::1] w,
                          const cplx[:, ::1] src, const cplx[:, ::1] gp, const cplx[:, ::1] gm,
                          cplx[:, ::1] ds):
    cdef Py_ssize_t n_atoms = s.shape[0]
    cdef Py_ssize_t n, l
    cdef int a, b
    cdef cplx acc
    for n in range(n_atoms):
        for a in range(3):
            acc = src[n, a]
            for b in range(3):
                acc = acc + w[n, a, b] * s[n, b]
            for l in range(n_atoms):
                if l == n:
                    continue
                if a == IM:
                    acc = acc - gp[n, l] * s[l, IM]
                    acc = acc + 2.0 * gp[n, l] * pget(pairs, pid, n, l, IZ, IM)
                elif a == IP:
                    acc = acc - gm[n, l] * s[l, IP]
                    acc = acc + 2.0 * gm[n, l] * pget(pairs, pid, n, l, IZ, IP)
                else:
                    acc = acc - gp[n, l] * pget(pairs, pid, n, l, IP, IM)
                    acc = acc - gm[n, l] * pget(pairs, pid, n, l, IM, IP)
            ds[n, a] = acc


cdef inline cplx pair_direct(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs,
                             const idx_t[:, ::1] pid, const cplx[:, ::1] gp,
                             const cplx[:, ::1] gm, const cplx[:, ::1] gam,
                             Py_ssize_t na, Py_ssize_t nb, int ja, int jb):
    """Direct term for ordered slot pair (A, B), no spectator."""
    if ja == IM and jb == IP:
        return (2.0 * gam[na, nb] * pget(pairs, pid, na, nb, IZ, IZ)
                - gp[na, nb] * s[nb, IZ] - gm[na, nb] * s[na, IZ])
    if ja == IZ and jb == IP:
        return -gp[na, nb] * pget(pairs, pid, na, nb, IP, IZ)
    if ja == IZ and jb == IM:
        return -gm[na, nb] * pget(pairs, pid, na, nb, IM, IZ)
    return 0.0


cdef void _order2_impl(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs, const idx_t[:, ::1] pid,
               const cplx[:, :, ::1] w, const cplx[:, ::1] src,
               const cplx[:, ::1] gp, const cplx[:, ::1] gm, const cplx[:, ::1] gam,
               cplx[:, ::1] ds, cplx[:, :, ::1] dpairs):
    cdef Py_ssize_t n_atoms = s.shape[0]
    cdef Py_ssize_t na, nb, l, k
    cdef int a, b, c
    cdef cplx acc, ug

    _singles_stored(s, pairs, pid, w, src, gp, gm, ds)

    for na in range(n_atoms):
        for nb in range(na + 1, n_atoms):
            k = pid[na, nb]
            for a in range(3):
                for b in range(3):
                    acc = src[na, a] * s[nb, b] + s[na, a] * src[nb, b]
                    for c in range(3):
                        acc = acc + w[na, a, c] * pairs[k, c, b]
                        acc = acc + w[nb, b, c] * pairs[k, a, c]
                    acc = acc + pair_direct(s, pairs, pid, gp, gm, gam, na, nb, a, b)
                    acc = acc + pair_direct(s, pairs, pid, gp, gm, gam, nb, na, b, a)
                    for l in range(n_atoms):
                        if l == na or l == nb:
                            continue
                        # external V, slot 1 then slot 2
                        if a == IM:
                            acc = acc - gp[na, l] * pget(pairs, pid, l, nb, IM, b)
                        elif a == IP:
                            acc = acc - gm[na, l] * pget(pairs, pid, l, nb, IP, b)
                        if b == IM:
                            acc = acc - gp[nb, l] * pget(pairs, pid, na, l, a, IM)
                        elif b == IP:
                            acc = acc - gm[nb, l] * pget(pairs, pid, na, l, a, IP)
                        # external U with the pair-level closure, slot 1
                        if a == IZ:
                            acc = acc - gp[na, l] * closure3(s, pairs, pid, na, l, nb, IP, IM, b)
                            acc = acc - gm[na, l] * closure3(s, pairs, pid, na, l, nb, IM, IP, b)
                        elif a == IP:
                            acc = acc + 2.0 * gm[na, l] * closure3(s, pairs, pid, na, l, nb, IZ, IP, b)
                        else:
                            acc = acc + 2.0 * gp[na, l] * closure3(s, pairs, pid, na, l, nb, IZ, IM, b)
                        # slot 2
                        if b == IZ:
                            acc = acc - gp[nb, l] * closure3(s, pairs, pid, na, nb, l, a, IP, IM)
                            acc = acc - gm[nb, l] * closure3(s, pairs, pid, na, nb, l, a, IM, IP)
                        elif b == IP:
                            acc = acc + 2.0 * gm[nb, l] * closure3(s, pairs, pid, na, nb, l, a, IZ, IP)
                        else:
                            acc = acc + 2.0 * gp[nb, l] * closure3(s, pairs, pid, na, nb, l, a, IZ, IM)
                    dpairs[k, a, b] = acc


cdef inline cplx triple_direct(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs,
                               const cplx[:, :, :, ::1] triples,
                               const idx_t[:, ::1] pid, const idx_t[:, :, ::1] tid,
                               const cplx[:, ::1] gp, const cplx[:, ::1] gm,
                               const cplx[:, ::1] gam,
                               Py_ssize_t na, Py_ssize_t nb, Py_ssize_t nsp,
                               int ja, int jb, int jsp):
    """Direct term for ordered slot pair (A, B) with spectator (nsp, jsp)."""
    if ja == IM and jb == IP:
        return (2.0 * gam[na, nb] * tget(triples, tid, na, nb, nsp, IZ, IZ, jsp)
                - gp[na, nb] * pget(pairs, pid, nb, nsp, IZ, jsp)
                - gm[na, nb] * pget(pairs, pid, na, nsp, IZ, jsp))
    if ja == IZ and jb == IP:
        return -gp[na, nb] * tget(triples, tid, na, nb, nsp, IP, IZ, jsp)
    if ja == IZ and jb == IM:
        return -gm[na, nb] * tget(triples, tid, na, nb, nsp, IM, IZ, jsp)
    return 0.0


cdef void _order3_impl(const cplx[:, ::1] s, const cplx[:, :, ::1] pairs,
               const cplx[:, :, :, ::1] triples,
               const idx_t[:, ::1] pid, const idx_t[:, :, ::1] tid,
               const cplx[:, :, ::1] w, const cplx[:, ::1] src,
               const cplx[:, ::1] gp, const cplx[:, ::1] gm, const cplx[:, ::1] gam,
               cplx[:, ::1] ds, cplx[:, :, ::1] dpairs,
               cplx[:, :, :, ::1] dtriples):
    cdef Py_ssize_t n_atoms = s.shape[0]
    cdef Py_ssize_t na, nb, nc, l, k, i, q
    cdef Py_ssize_t a1, a2, a3
    cdef int a, b, c, d, ja, jb, jsp
    cdef cplx acc, val
    cdef Py_ssize_t at[3]
    cdef int js[3]
    cdef Py_ssize_t r1, r2
    cdef int jr1, jr2

    _singles_stored(s, pairs, pid, w, src, gp, gm, ds)

    # pair block: same one-atom/direct/V structure as order 2, but the
    # external U terms read the stored triples
    for na in range(n_atoms):
        for nb in range(na + 1, n_atoms):
            k = pid[na, nb]
            for a in range(3):
                for b in range(3):
                    acc = src[na, a] * s[nb, b] + s[na, a] * src[nb, b]
                    for c in range(3):
                        acc = acc + w[na, a, c] * pairs[k, c, b]
                        acc = acc + w[nb, b, c] * pairs[k, a, c]
                    acc = acc + pair_direct(s, pairs, pid, gp, gm, gam, na, nb, a, b)
                    acc = acc + pair_direct(s, pairs, pid, gp, gm, gam, nb, na, b, a)
                    for l in range(n_atoms):
                        if l == na or l == nb:
                            continue
                        if a == IM:
                            acc = acc - gp[na, l] * pget(pairs, pid, l, nb, IM, b)
                        elif a == IP:
                            acc = acc - gm[na, l] * pget(pairs, pid, l, nb, IP, b)
                        if b == IM:
                            acc = acc - gp[nb, l] * pget(pairs, pid, na, l, a, IM)
                        elif b == IP:
                            acc = acc - gm[nb, l] * pget(pairs, pid, na, l, a, IP)
                        if a == IZ:
                            acc = acc - gp[na, l] * tget(triples, tid, na, l, nb, IP, IM, b)
                            acc = acc - gm[na, l] * tget(triples, tid, na, l, nb, IM, IP, b)
                        elif a == IP:
                            acc = acc + 2.0 * gm[na, l] * tget(triples, tid, na, l, nb, IZ, IP, b)
                        else:
                            acc = acc + 2.0 * gp[na, l] * tget(triples, tid, na, l, nb, IZ, IM, b)
                        if b == IZ:
                            acc = acc - gp[nb, l] * tget(triples, tid, na, nb, l, a, IP, IM)
                            acc = acc - gm[nb, l] * tget(triples, tid, na, nb, l, a, IM, IP)
                        elif b == IP:
                            acc = acc + 2.0 * gm[nb, l] * tget(triples, tid, na, nb, l, a, IZ, IP)
                        else:
                            acc = acc + 2.0 * gp[nb, l] * tget(triples, tid, na, nb, l, a, IZ, IM)
                    dpairs[k, a, b] = acc

    # triple block
    for na in range(n_atoms):
        for nb in range(na + 1, n_atoms):
            for nc in range(nb + 1, n_atoms):
                k = tid[na, nb, nc]
                at[0] = na; at[1] = nb; at[2] = nc
                for a in range(3):
                    js[0] = a
                    for b in range(3):
                        js[1] = b
                        for c in range(3):
                            js[2] = c
                            acc = 0.0
                            for i in range(3):
                                a1 = at[i]
                                ja = js[i]
                                if i == 0:
                                    r1 = at[1]; r2 = at[2]; jr1 = js[1]; jr2 = js[2]
                                elif i == 1:
                                    r1 = at[0]; r2 = at[2]; jr1 = js[0]; jr2 = js[2]
                                else:
                                    r1 = at[0]; r2 = at[1]; jr1 = js[0]; jr2 = js[1]
                                # one-atom terms on the active slot
                                acc = acc + src[a1, ja] * pget(pairs, pid, r1, r2, jr1, jr2)
                                for d in range(3):
                                    if i == 0:
                                        acc = acc + w[a1, ja, d] * triples[k, d, b, c]
                                    elif i == 1:
                                        acc = acc + w[a1, ja, d] * triples[k, a, d, c]
                                    else:
                                        acc = acc + w[a1, ja, d] * triples[k, a, b, d]
                                # external sums on the active slot
                                for l in range(n_atoms):
                                    if l == na or l == nb or l == nc:
                                        continue
                                    if ja == IM:
                                        acc = acc - gp[a1, l] * tget(triples, tid, l, r1, r2, IM, jr1, jr2)
                                    elif ja == IP:
                                        acc = acc - gm[a1, l] * tget(triples, tid, l, r1, r2, IP, jr1, jr2)
                                    if ja == IZ:
                                        acc = acc - gp[a1, l] * closure4(s, pairs, triples, pid, tid,
                                                                         a1, l, r1, r2, IP, IM, jr1, jr2)
                                        acc = acc - gm[a1, l] * closure4(s, pairs, triples, pid, tid,
                                                                         a1, l, r1, r2, IM, IP, jr1, jr2)
                                    elif ja == IP:
                                        acc = acc + 2.0 * gm[a1, l] * closure4(s, pairs, triples, pid, tid,
                                                                               a1, l, r1, r2, IZ, IP, jr1, jr2)
                                    else:
                                        acc = acc + 2.0 * gp[a1, l] * closure4(s, pairs, triples, pid, tid,
                                                                               a1, l, r1, r2, IZ, IM, jr1, jr2)
                            # direct terms for every ordered slot pair
                            for i in range(3):
                                for q in range(3):
                                    if i == q:
                                        continue
                                    acc = acc + triple_direct(
                                        s, pairs, triples, pid, tid, gp, gm, gam,
                                        at[i], at[q], at[3 - i - q],
                                        js[i], js[q], js[3 - i - q])
                            dtriples[k, a, b, c] = acc

def rhs_order1(s, w, src, gp, gm, ds, int repeats=1):
    _order1_impl(s, w, src, gp, gm, ds, repeats)


def rhs_order2(s, pairs, pid, w, src, gp, gm, gam, ds, dpairs, int repeats=1):
    cdef int r
    for r in range(repeats):
        _order2_impl(s, pairs, pid, w, src, gp, gm, gam, ds, dpairs)


def rhs_order3(s, pairs, triples, pid, tid, w, src, gp, gm, gam,
               ds, dpairs, dtriples, int repeats=1):
    """repeats > 1 reruns the assembly in C; used to amortize call overhead
    when measuring the N-scaling of the kernels."""
    cdef int r
    for r in range(repeats):
        _order3_impl(s, pairs, triples, pid, tid, w, src, gp, gm, gam,
                     ds, dpairs, dtriples)
