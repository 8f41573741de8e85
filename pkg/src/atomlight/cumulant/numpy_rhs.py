"""Vectorized (BLAS-backed) right-hand sides for the mean-field hierarchy.

Strategy: unpack the canonically stored tensors into full redundant arrays
(zero on index collisions), assemble the derivative with einsum/broadcast
contractions, and gather the canonical slots back.  Sums over an external
atom l exclude collisions either automatically (the coupling matrices and
the full tensors carry zero diagonals/collision slots) or through
intermediates from which the l = m, l = p contributions have been subtracted
before entering the contraction.  Closure products are distributed into the
contractions, so nothing above the stored order is ever materialized.

The mirror-image terms of the pair equations come from exchange symmetry:
the slot-1 expression E1 is evaluated on the full (n, m) grid and the slot-2
part is its (n <-> m, a <-> b) transpose.  The triple equations reuse a
single active-slot routine on axis-permuted views of the triple tensor.
"""

import numpy as np

from .state import (M, P, Z, HierarchyState, OneAtomTerms, TwoAtomTensors,
                    n_pairs, n_triples)
from functools import lru_cache, partial

_es = partial(np.einsum, optimize=True)


@lru_cache(maxsize=None)
def _pair_indices(n):
    iu, ju = np.triu_indices(n, 1)
    return iu, ju


@lru_cache(maxsize=None)
def _triple_indices(n):
    idx = [(a, b, c) for a in range(n) for b in range(a + 1, n)
           for c in range(b + 1, n)]
    arr = np.array(idx, dtype=np.intp).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def pairs_full(state):
    """(n, n, 3, 3) array with both orderings filled and a zero diagonal."""
    n = state.n_atoms
    full = np.zeros((n, n, 3, 3), dtype=complex)
    if n_pairs(n):
        iu, ju = _pair_indices(n)
        full[iu, ju] = state.pairs
        full[ju, iu] = state.pairs.transpose(0, 2, 1)
    return full


def triples_full(state):
    """(n, n, n, 3, 3, 3) array, zero whenever two atom indices collide."""
    n = state.n_atoms
    full = np.zeros((n, n, n, 3, 3, 3), dtype=complex)
    if n_triples(n):
        ii, jj, kk = _triple_indices(n)
        axes = [ii, jj, kk]
        for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2),
                     (1, 2, 0), (2, 0, 1), (2, 1, 0)):
            full[axes[perm[0]], axes[perm[1]], axes[perm[2]]] = (
                state.triples.transpose(0, 1 + perm[0], 1 + perm[1], 1 + perm[2])
            )
    return full


# U-tensor sparsity: (slot-1 j, internal j', external j'', weight picker)
# weights are formed from g+- at call time; picker is 'gp'/'gm' with sign.
def _u_patterns(gp, gm):
    return (
        (Z, P, M, -gp),
        (Z, M, P, -gm),
        (P, Z, P, 2.0 * gm),
        (M, Z, M, 2.0 * gp),
    )


def _singles_rhs(s, p_full, one_atom, gp, gm):
    """d<singles>; p_full may be a closed product for order 1."""
    ds = one_atom.s + _es("nab,nb->na", one_atom.w, s)
    ds[:, M] -= gp @ s[:, M]
    ds[:, P] -= gm @ s[:, P]
    ds[:, Z] -= _es("nl,nl->n", gp, p_full[:, :, P, M])
    ds[:, Z] -= _es("nl,nl->n", gm, p_full[:, :, M, P])
    ds[:, P] += 2.0 * _es("nl,nl->n", gm, p_full[:, :, Z, P])
    ds[:, M] += 2.0 * _es("nl,nl->n", gp, p_full[:, :, Z, M])
    return ds


def rhs_order1(state, one_atom, two_atom):
    s = state.singles
    gp, gm = two_atom.g_plus, two_atom.g_minus
    # order-1 closure: <Q_n Q_l> -> s_n s_l, distributed into the l sums
    ds = one_atom.s + _es("nab,nb->na", one_atom.w, s)
    ds[:, M] -= gp @ s[:, M]
    ds[:, P] -= gm @ s[:, P]
    ds[:, Z] -= s[:, P] * (gp @ s[:, M]) + s[:, M] * (gm @ s[:, P])
    ds[:, P] += 2.0 * s[:, Z] * (gm @ s[:, P])
    ds[:, M] += 2.0 * s[:, Z] * (gp @ s[:, M])
    deriv = state.zeros_like()
    deriv.singles[:] = ds
    return deriv


def rhs_linear(state, one_atom, two_atom):
    """Order-1 RHS with <e_n> pinned to zero (weak-drive linearization)."""
    clipped = state.copy()
    clipped.singles[:, Z] = 0.0
    deriv = rhs_order1(clipped, one_atom, two_atom)
    deriv.singles[:, Z] = 0.0
    return deriv


def _pair_slot1(s, p_full, t_full, one_atom, gp, gm, gam):
    """Slot-1 half of the pair derivative on the full (n, m) grid.

    The full pair derivative is E1 + E1.transpose(1, 0, 3, 2).
    """
    n = s.shape[0]
    e1 = _es("na,mb->nmab", one_atom.s, s)
    e1 += _es("nac,nmcb->nmab", one_atom.w, p_full)

    # direct terms written on (j, j') slots as in the operator equations;
    # their transpose images arrive with the slot-2 half
    e1[:, :, M, P] += (2.0 * gam * p_full[:, :, Z, Z]
                       - gp * s[None, :, Z] - gm * s[:, None, Z])
    e1[:, :, Z, P] += -gp * p_full[:, :, P, Z]
    e1[:, :, Z, M] += -gm * p_full[:, :, M, Z]

    # external V terms (l = n dies on the coupling diagonal, l = m on the
    # p_full diagonal)
    gpm = _es("nl,lmb->nmb", gp, p_full[:, :, M, :])
    gmp = _es("nl,lmb->nmb", gm, p_full[:, :, P, :])
    e1[:, :, M, :] -= gpm
    e1[:, :, P, :] -= gmp

    if t_full is None:
        # order 2: close the external triples with the pair-level rule
        for a0, c, d, ug in _u_patterns(gp, gm):
            base = gpm if d == M else gmp
            sign = -1.0 if a0 == Z else 2.0
            g3 = sign * base
            alpha = _es("nl,nl->n", ug, p_full[:, :, c, d])
            beta = ug @ s[:, d]
            # <Q_n^c Q_l^d> <Q_m^b>, minus its l = m contribution
            e1[:, :, a0, :] += (alpha[:, None] - ug * p_full[:, :, c, d])[:, :, None] * s[None, :, :]
            # <Q_n^c Q_m^b> <Q_l^d>, minus l = m
            e1[:, :, a0, :] += (beta[:, None] - ug * s[None, :, d])[:, :, None] * p_full[:, :, c, :]
            # <Q_l^d Q_m^b> <Q_n^c>  (collisions die inside g3)
            e1[:, :, a0, :] += s[:, c][:, None, None] * g3
            # -2 <Q_n^c><Q_l^d><Q_m^b>, minus l = m
            e1[:, :, a0, :] += (-2.0 * (beta[:, None] - ug * s[None, :, d])
                                * s[:, c][:, None])[:, :, None] * s[None, :, :]
    else:
        # order 3: the external triples are stored
        for a0, c, d, ug in _u_patterns(gp, gm):
            e1[:, :, a0, :] += _es("nl,nlmb->nmb", ug, t_full[:, :, :, c, d, :])
    return e1


def _triple_slot1(s, p_full, t_full, one_atom, gp, gm):
    """One-atom + external terms for the first slot of the triple equations.

    Computes F[n, m, p, a, b, c]; the caller sums this over axis-permuted
    views to cover all three slots.  Quadruples are closed with the
    zero-fourth-cumulant rule, each partition distributed into contractions;
    intermediates carry the l = m / l = p exclusions.
    """
    f = _es("na,mpbc->nmpabc", one_atom.s, p_full)
    f += _es("nad,nmpdbc->nmpabc", one_atom.w, t_full)
    f[:, :, :, M] -= _es("nl,lmpbc->nmpbc", gp, t_full[:, :, :, M])
    f[:, :, :, P] -= _es("nl,lmpbc->nmpbc", gm, t_full[:, :, :, P])

    for a0, d, e, ug in _u_patterns(gp, gm):
        t_de = t_full[:, :, :, d, e, :]          # T[n, l, m, d, e, b] on (n, l, m, b)
        p_de = p_full[:, :, d, e]
        p_d = p_full[:, :, d, :]
        p_e = p_full[:, :, e, :]
        s_d = s[:, d]
        s_e = s[:, e]

        beta = ug @ s_e                                   # sum_l ug[n,l] s[l,e]
        beta_mp = (beta[:, None, None]
                   - (ug * s_e[None, :])[:, :, None]      # drop l = m
                   - (ug * s_e[None, :])[:, None, :])     # drop l = p
        alpha = _es("nl,nl->n", ug, p_de)
        alpha_mp = (alpha[:, None, None]
                    - (ug * p_de)[:, :, None]
                    - (ug * p_de)[:, None, :])
        k1 = _es("nl,nlmb->nmb", ug, t_de)          # sum_l ug T[n,l,m,d,e,b]
        # K with the remaining triple index excluded (l = p for the m-role)
        k1_p = k1[:, :, None, :] - _es("np,npmb->nmpb", ug, t_de)
        k2_m = k1[:, None, :, :] - _es("nm,nmpc->nmpc", ug, t_de)
        mbig = _es("nl,lmpbc->nmpbc", ug, t_full[:, :, :, e, :, :])
        j = _es("nl,lpc->npc", ug, p_e)             # sum_l ug[n,l] P[l,p,e,c]
        j_m = j[:, None, :, :] - _es("nm,mpc->nmpc", ug, p_e)
        j2_p = j[:, :, None, :] - _es("np,pmb->nmpb", ug, p_e)

        acc = _es("nmpb,pc->nmpbc", k1_p, s)            # <nld><..> T(n,l,m) s_p
        acc += _es("nmpc,mb->nmpbc", k2_m, s)           # T(n,l,p) s_m
        acc += beta_mp[:, :, :, None, None] * t_full[:, :, :, d, :, :]  # T(n,m,p) s_l
        acc += s_d[:, None, None, None, None] * mbig          # T(l,m,p) s_n
        acc += alpha_mp[:, :, :, None, None] * p_full[None, :, :, :, :]   # P(n,l) P(m,p)
        acc += _es("nmb,nmpc->nmpbc", p_d, j_m)         # P(n,m) P(l,p)
        acc += _es("npc,nmpb->nmpbc", p_d, j2_p)        # P(n,p) P(l,m)
        two = (alpha_mp[:, :, :, None] * s[None, :, None, :])[:, :, :, :, None] * s[None, None, :, None, :]
        two += _es("nmp,nmb,pc->nmpbc", beta_mp, p_d, s)
        two += _es("nmp,npc,mb->nmpbc", beta_mp, p_d, s)
        two += _es("nmpb,n,pc->nmpbc", j2_p, s_d, s)
        two += _es("nmpc,n,mb->nmpbc", j_m, s_d, s)
        two += _es("nmp,n,mpbc->nmpbc", beta_mp, s_d, p_full)
        acc -= 2.0 * two
        acc += 6.0 * ((beta_mp * s_d[:, None, None])[:, :, :, None]
                      * s[None, :, None, :])[:, :, :, :, None] * s[None, None, :, None, :]
        f[:, :, :, a0] += acc
    return f


def _triple_direct12(p_full, t_full, gp, gm, gam):
    """Direct dipole terms for slot pair (1, 2) with slot 3 as spectator."""
    n = p_full.shape[0]
    d = np.zeros((n, n, n, 3, 3, 3), dtype=complex)
    d[:, :, :, M, P, :] = (2.0 * gam[:, :, None, None] * t_full[:, :, :, Z, Z, :]
                           - gp[:, :, None, None] * p_full[None, :, :, Z, :]
                           - gm[:, :, None, None] * p_full[:, None, :, Z, :])
    d[:, :, :, Z, P, :] = -gp[:, :, None, None] * t_full[:, :, :, P, Z, :]
    d[:, :, :, Z, M, :] = -gm[:, :, None, None] * t_full[:, :, :, M, Z, :]
    return d


def _permute_axes(perm):
    return tuple(perm) + tuple(3 + i for i in perm)


def rhs_order2(state, one_atom, two_atom):
    gp, gm, gam = two_atom.g_plus, two_atom.g_minus, two_atom.gamma_nm
    s = state.singles
    p_full = pairs_full(state)
    deriv = state.zeros_like()
    deriv.singles[:] = _singles_rhs(s, p_full, one_atom, gp, gm)
    e1 = _pair_slot1(s, p_full, None, one_atom, gp, gm, gam)
    dp_full = e1 + e1.transpose(1, 0, 3, 2)
    iu, ju = _pair_indices(state.n_atoms)
    deriv.pairs[:] = dp_full[iu, ju]
    return deriv


def rhs_order3(state, one_atom, two_atom):
    gp, gm, gam = two_atom.g_plus, two_atom.g_minus, two_atom.gamma_nm
    s = state.singles
    p_full = pairs_full(state)
    t_full = triples_full(state)
    deriv = state.zeros_like()
    deriv.singles[:] = _singles_rhs(s, p_full, one_atom, gp, gm)
    e1 = _pair_slot1(s, p_full, t_full, one_atom, gp, gm, gam)
    dp_full = e1 + e1.transpose(1, 0, 3, 2)
    iu, ju = _pair_indices(state.n_atoms)
    deriv.pairs[:] = dp_full[iu, ju]

    dt_full = np.zeros_like(t_full)
    for perm in ((0, 1, 2), (1, 0, 2), (2, 0, 1)):
        t_view = t_full.transpose(_permute_axes(perm))
        f = _triple_slot1(s, p_full, t_view, one_atom, gp, gm)
        inv = tuple(np.argsort(perm))
        dt_full += f.transpose(_permute_axes(inv))
    for perm in ((0, 1, 2), (1, 0, 2), (0, 2, 1),
                 (2, 0, 1), (1, 2, 0), (2, 1, 0)):
        t_view = t_full.transpose(_permute_axes(perm))
        dd = _triple_direct12(p_full, t_view, gp, gm, gam)
        inv = tuple(np.argsort(perm))
        dt_full += dd.transpose(_permute_axes(inv))
    ii, jj, kk = _triple_indices(state.n_atoms)
    deriv.triples[:] = dt_full[ii, jj, kk]
    return deriv


def rhs(state, one_atom, two_atom):
    """Dispatch on the stored order."""
    if state.order == 1:
        return rhs_order1(state, one_atom, two_atom)
    if state.order == 2:
        return rhs_order2(state, one_atom, two_atom)
    return rhs_order3(state, one_atom, two_atom)
