"""Literal, loop-based right-hand side of the mean-field hierarchy.

This module transcribes the operator equations of motion term by term, with
every above-order expectation value resolved lazily through get_expectation.
It is deliberately slow and deliberately transparent: the vectorized and
compiled backends are validated against it on random states, and it is the
one place where the equations can be read off directly.

Structure of the equations, for distinct atoms and slots ordered (-1, 0, +1):

  singles   d<Q_n^a>   = S_n^a + W_n^{ab} <Q_n^b>
                         + sum_{l != n} [ V_{nl}^{ab} <Q_l^b>
                                        + U_{nl}^{abc} <Q_n^b Q_l^c> ]
  pairs     d<Q_n Q_m> = one-atom terms on each slot (S cross terms + W)
                         + external sums over l not in {n, m} (V substitutes
                           the slot's atom by l; U raises the order by one)
                         + direct pair terms between n and m
  triples   same pattern: one-atom terms per slot, external sums per slot
            (raising to quadruples), direct terms for each ordered slot pair
            with the third operator as a spectator.

  direct terms (first slot's atom A, second slot's atom B, optional
  spectator X):
      d<Q_A^{-1} Q_B^{+1} X> += 2 Gamma_AB <Q_A^0 Q_B^0 X>
                                - g+_AB <Q_B^0 X> - g-_AB <Q_A^0 X>
      d<Q_A^{0} Q_B^{+1} X>  += -g+_AB <Q_A^{+1} Q_B^0 X>
      d<Q_A^{0} Q_B^{-1} X>  += -g-_AB <Q_A^{-1} Q_B^0 X>
"""

from itertools import combinations

from ..errors import InvalidArgument
from .state import (M, P, Z, HierarchyState, OneAtomTerms, TwoAtomTensors,
                    get_expectation, pair_table, triple_table)

_JS = (-1, 0, +1)


def _direct_terms(get, gp, gm, gam, a_atom, b_atom, ja, jb, spectator):
    """Direct dipole-coupling term for slot pair (A, B), spectator carried."""
    ext_atoms = spectator[0] if spectator else ()
    ext_js = spectator[1] if spectator else ()

    def g(atoms, js):
        return get(atoms + ext_atoms, js + ext_js)

    if (ja, jb) == (-1, +1):
        return (2.0 * gam[a_atom, b_atom] * g((a_atom, b_atom), (0, 0))
                - gp[a_atom, b_atom] * g((b_atom,), (0,))
                - gm[a_atom, b_atom] * g((a_atom,), (0,)))
    if ja == 0 and jb == +1:
        return -gp[a_atom, b_atom] * g((a_atom, b_atom), (+1, 0))
    if ja == 0 and jb == -1:
        return -gm[a_atom, b_atom] * g((a_atom, b_atom), (-1, 0))
    return 0.0


def rhs_reference(state: HierarchyState, one_atom: OneAtomTerms,
                  two_atom: TwoAtomTensors) -> HierarchyState:
    n = state.n_atoms
    w, s = one_atom.w, one_atom.s
    v, u = two_atom.v(), two_atom.u()
    gp, gm, gam = two_atom.g_plus, two_atom.g_minus, two_atom.gamma_nm
    memo = {}

    def get(atoms, js):
        return get_expectation(state, atoms, js, memo)

    deriv = state.zeros_like()

    for na in range(n):
        for ja in _JS:
            val = s[na, ja + 1]
            for jb in _JS:
                val += w[na, ja + 1, jb + 1] * state.singles[na, jb + 1]
            for l in range(n):
                if l == na:
                    continue
                for jb in _JS:
                    val += v[na, l, ja + 1, jb + 1] * get((l,), (jb,))
                    for jc in _JS:
                        uu = u[na, l, ja + 1, jb + 1, jc + 1]
                        if uu != 0.0:
                            val += uu * get((na, l), (jb, jc))
            deriv.singles[na, ja + 1] = val

    if state.order >= 2:
        pid = pair_table(n)
        for na, nb in combinations(range(n), 2):
            for ja in _JS:
                for jb in _JS:
                    val = (s[na, ja + 1] * get((nb,), (jb,))
                           + get((na,), (ja,)) * s[nb, jb + 1])
                    for jc in _JS:
                        val += w[na, ja + 1, jc + 1] * get((na, nb), (jc, jb))
                        val += w[nb, jb + 1, jc + 1] * get((na, nb), (ja, jc))
                    for l in range(n):
                        if l in (na, nb):
                            continue
                        for jc in _JS:
                            val += v[na, l, ja + 1, jc + 1] * get((l, nb), (jc, jb))
                            val += v[nb, l, jb + 1, jc + 1] * get((na, l), (ja, jc))
                            for jd in _JS:
                                uu = u[na, l, ja + 1, jc + 1, jd + 1]
                                if uu != 0.0:
                                    val += uu * get((na, l, nb), (jc, jd, jb))
                                uu = u[nb, l, jb + 1, jc + 1, jd + 1]
                                if uu != 0.0:
                                    val += uu * get((na, nb, l), (ja, jc, jd))
                    val += _direct_terms(get, gp, gm, gam, na, nb, ja, jb, None)
                    val += _direct_terms(get, gp, gm, gam, nb, na, jb, ja, None)
                    deriv.pairs[pid[na, nb], ja + 1, jb + 1] = val

    if state.order >= 3:
        tid = triple_table(n)
        for atoms in combinations(range(n), 3):
            for ja in _JS:
                for jb in _JS:
                    for jc in _JS:
                        js = (ja, jb, jc)
                        val = 0.0
                        # one-atom and external terms, slot by slot
                        for i in range(3):
                            ai, ji = atoms[i], js[i]
                            rest_atoms = atoms[:i] + atoms[i + 1:]
                            rest_js = js[:i] + js[i + 1:]
                            val += s[ai, ji + 1] * get(rest_atoms, rest_js)
                            for jd in _JS:
                                sub = js[:i] + (jd,) + js[i + 1:]
                                val += w[ai, ji + 1, jd + 1] * get(atoms, sub)
                            for l in range(n):
                                if l in atoms:
                                    continue
                                for jd in _JS:
                                    val += (v[ai, l, ji + 1, jd + 1]
                                            * get((l,) + rest_atoms,
                                                  (jd,) + rest_js))
                                    for je in _JS:
                                        uu = u[ai, l, ji + 1, jd + 1, je + 1]
                                        if uu != 0.0:
                                            val += uu * get(
                                                (ai, l) + rest_atoms,
                                                (jd, je) + rest_js)
                        # direct terms for every ordered slot pair
                        for i in range(3):
                            for k in range(3):
                                if i == k:
                                    continue
                                spect = 3 - i - k
                                val += _direct_terms(
                                    get, gp, gm, gam,
                                    atoms[i], atoms[k], js[i], js[k],
                                    ((atoms[spect],), (js[spect],)))
                        deriv.triples[tid[atoms], ja + 1, jb + 1, jc + 1] = val

    return deriv


def rhs_linear_reference(state: HierarchyState, one_atom: OneAtomTerms,
                         two_atom: TwoAtomTensors) -> HierarchyState:
    """Weak-drive linearization: every occurrence of <e_n> is pinned to zero.

    Valid for order-1 states only; <e> stays identically zero (its derivative
    is forced to zero as well), leaving the familiar linear coupled-dipole
    equations for <sigma->.
    """
    if state.order != 1:
        raise InvalidArgument("linear approximation is defined for order-1 states")
    clipped = state.copy()
    clipped.singles[:, Z] = 0.0
    deriv = rhs_reference(clipped, one_atom, two_atom)
    deriv.singles[:, Z] = 0.0
    return deriv
