"""Hierarchy state tensors and the cumulant closure engine.

The operator alphabet per atom is Q^{-1} = sigma-, Q^0 = e, Q^{+1} = sigma+;
array axes of length 3 are ordered (-1, 0, +1).  A HierarchyState of order k
stores expectation values of products of up to k operators on distinct atoms:
singles (n, 3), pairs ((n choose 2), 3, 3) keyed by sorted atom pairs, and at
order 3 triples ((n choose 3), 3, 3, 3) keyed by sorted atom triples.
Exchange symmetry is definitional: accessors transpose slots to the sorted
key, and nothing is stored twice.

Expectation values above the stored order are produced on demand by setting
the next cumulant to zero.  One recursive rule covers every case used here:
a k-operator value is the sum over proper set partitions of the k slots with
coefficient (-1)^{|pi|} (|pi| - 1)!, each block evaluated recursively (stored
tensors once the block fits).  For quadruples over a pair-level state this
reproduces the pair-product formula used by the two-time initial conditions,
and for quintuples over a triple-level state it reproduces the nested rule
that evaluates the embedded quadruples with the standard quadruple closure.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..core import GAMMA, DriveField
from ..errors import InvalidArgument
from ..kernel import CouplingSet

M, Z, P = 0, 1, 2  # array slots for j = -1, 0, +1


@lru_cache(maxsize=None)
def pair_table(n):
    """pid[a, b] = packed index of the sorted pair {a, b}; -1 on the diagonal."""
    pid = -np.ones((n, n), dtype=np.int64)
    k = 0
    for a in range(n):
        for b in range(a + 1, n):
            pid[a, b] = pid[b, a] = k
            k += 1
    pid.setflags(write=False)
    return pid


@lru_cache(maxsize=None)
def triple_table(n):
    """tid[a, b, c] = packed index of the sorted triple; -1 on collisions."""
    tid = -np.ones((n, n, n), dtype=np.int64)
    k = 0
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                for perm in ((a, b, c), (a, c, b), (b, a, c),
                             (b, c, a), (c, a, b), (c, b, a)):
                    tid[perm] = k
                k += 1
    tid.setflags(write=False)
    return tid


def n_pairs(n):
    return n * (n - 1) // 2


def n_triples(n):
    return n * (n - 1) * (n - 2) // 6


class HierarchyState:
    """Mean-field state of order 1, 2 or 3 backed by one flat complex vector.

    The flat layout (singles, then pairs, then triples) lets the generic
    Runge-Kutta driver treat the whole hierarchy as a single ndarray.
    """

    __slots__ = ("n_atoms", "order", "data", "singles", "pairs", "triples")

    def __init__(self, n_atoms, order, data=None):
        if order not in (1, 2, 3):
            raise InvalidArgument(f"order must be 1, 2 or 3, got {order}")
        if n_atoms < 1:
            raise InvalidArgument("need at least one atom")
        if order > n_atoms:
            # A pair (triple) tensor needs two (three) distinct atoms; cap the
            # order instead of allocating empty tensors with no dynamics.
            order = n_atoms
        self.n_atoms = n_atoms
        self.order = order
        size = 3 * n_atoms
        if order >= 2:
            size += 9 * n_pairs(n_atoms)
        if order >= 3:
            size += 27 * n_triples(n_atoms)
        if data is None:
            data = np.zeros(size, dtype=complex)
        else:
            data = np.asarray(data, dtype=complex)
            if data.shape != (size,):
                raise InvalidArgument(f"data must have shape ({size},)")
        self.data = data
        k = 3 * n_atoms
        self.singles = data[:k].reshape(n_atoms, 3)
        self.pairs = None
        self.triples = None
        if order >= 2:
            k2 = k + 9 * n_pairs(n_atoms)
            self.pairs = data[k:k2].reshape(n_pairs(n_atoms), 3, 3)
            k = k2
        if order >= 3:
            self.triples = data[k:].reshape(n_triples(n_atoms), 3, 3, 3)

    def copy(self):
        return HierarchyState(self.n_atoms, self.order, self.data.copy())

    def zeros_like(self):
        return HierarchyState(self.n_atoms, self.order)

    def hermitian_defect(self):
        """max |value - conj(j-negated value)| over every stored tensor.

        Physical states satisfy <Q^j...> = conj(<Q^{-j}...>) slotwise; the
        evolution preserves this, so the defect doubles as an RHS-assembly
        check.
        """
        rev = slice(None, None, -1)
        d = np.max(np.abs(self.singles - np.conj(self.singles[:, rev])))
        if self.pairs is not None and self.pairs.size:
            d = max(d, np.max(np.abs(self.pairs - np.conj(self.pairs[:, rev, rev]))))
        if self.triples is not None and self.triples.size:
            d = max(d, np.max(np.abs(
                self.triples - np.conj(self.triples[:, rev, rev, rev]))))
        return float(d)


def initial_ground(n_atoms, order):
    """All atoms in |g>: every stored expectation value is zero."""
    return HierarchyState(n_atoms, order)


def initial_all_excited(n_atoms, order):
    """Product state |e...e>: pure-e entries are 1, anything with sigma is 0."""
    state = HierarchyState(n_atoms, order)
    state.singles[:, Z] = 1.0
    if state.pairs is not None:
        state.pairs[:, Z, Z] = 1.0
    if state.triples is not None:
        state.triples[:, Z, Z, Z] = 1.0
    return state


def _set_partitions(items):
    """All partitions of a list, as lists of blocks."""
    if len(items) == 1:
        yield [items]
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


@lru_cache(maxsize=None)
def _closure_partitions(k):
    """(coeff, blocks) for every proper partition of k slots, from kappa_k = 0."""
    out = []
    for part in _set_partitions(list(range(k))):
        if len(part) == 1:
            continue
        coeff = (-1) ** len(part) * float(math.factorial(len(part) - 1))
        out.append((coeff, tuple(tuple(b) for b in part)))
    return tuple(out)


def _stored(state, atoms, js):
    k = len(atoms)
    if k == 1:
        return state.singles[atoms[0], js[0] + 1]
    if k == 2:
        a, b = atoms
        if a < b:
            return state.pairs[pair_table(state.n_atoms)[a, b], js[0] + 1, js[1] + 1]
        return state.pairs[pair_table(state.n_atoms)[b, a], js[1] + 1, js[0] + 1]
    order = np.argsort(atoms, kind="stable")
    key = tuple(atoms[i] for i in order)
    tid = triple_table(state.n_atoms)[key]
    slots = tuple(js[i] + 1 for i in order)
    return state.triples[(tid,) + slots]


def get_expectation(state, atoms, js, memo=None):
    """<Q_{n1}^{j1} ... > from stored tensors, closing above the stored order.

    atoms must be distinct; up to order + 2 operators are supported (the
    two-time initial conditions need that much).
    """
    atoms = tuple(atoms)
    js = tuple(js)
    if len(atoms) != len(js):
        raise InvalidArgument("atoms and js must have equal length")
    if len(set(atoms)) != len(atoms):
        raise InvalidArgument(f"repeated atom index in {atoms}")
    if len(atoms) > state.order + 2:
        raise InvalidArgument(
            f"{len(atoms)} operators exceeds order {state.order} + 2"
        )
    return _value(state, atoms, js, memo)


def _value(state, atoms, js, memo):
    k = len(atoms)
    if k <= state.order:
        return _stored(state, atoms, js)
    if memo is not None:
        key = (atoms, js)
        hit = memo.get(key)
        if hit is not None:
            return hit
    total = 0.0 + 0.0j
    for coeff, blocks in _closure_partitions(k):
        prod = coeff
        for block in blocks:
            prod *= _value(state, tuple(atoms[i] for i in block),
                           tuple(js[i] for i in block), memo)
        total += prod
    if memo is not None:
        memo[key] = total
    return total


def from_density_matrix(rho, order, n_atoms=None):
    """Extract the exact expectation tensors of a density matrix.

    The workhorse for oracle comparisons: at order k this returns the
    HierarchyState whose entries are the exact <Q...Q> values of rho.
    """
    from .. import exact

    rho = np.asarray(rho)
    if n_atoms is None:
        n_atoms = int(np.log2(rho.shape[0]))
    state = HierarchyState(n_atoms, order)
    js3 = (-1, 0, +1)
    for n in range(n_atoms):
        for j in js3:
            state.singles[n, j + 1] = exact.expect_multi(rho, [n], [j])
    if state.pairs is not None:
        pid = pair_table(n_atoms)
        for a in range(n_atoms):
            for b in range(a + 1, n_atoms):
                for ja in js3:
                    for jb in js3:
                        state.pairs[pid[a, b], ja + 1, jb + 1] = exact.expect_multi(
                            rho, [a, b], [ja, jb]
                        )
    if state.triples is not None:
        tid = triple_table(n_atoms)
        for a in range(n_atoms):
            for b in range(a + 1, n_atoms):
                for c in range(b + 1, n_atoms):
                    for ja in js3:
                        for jb in js3:
                            for jc in js3:
                                state.triples[
                                    tid[a, b, c], ja + 1, jb + 1, jc + 1
                                ] = exact.expect_multi(rho, [a, b, c], [ja, jb, jc])
    return state


@dataclass(frozen=True)
class OneAtomTerms:
    """Drift matrix W_n and source S_n of the single-atom part of the motion.

    Rows/columns are ordered j = -1, 0, +1.  With no drive and no detuning
    W_n = diag(-Gamma/2, -Gamma, -Gamma/2) and S_n = 0.
    """

    w: np.ndarray  # (n, 3, 3)
    s: np.ndarray  # (n, 3)


def build_one_atom_terms(drive: DriveField) -> OneAtomTerms:
    n = drive.n_atoms
    om = drive.rabi
    omc = np.conj(om)
    det = drive.detuning
    w = np.zeros((n, 3, 3), dtype=complex)
    w[:, M, M] = 1j * det - 0.5 * GAMMA
    w[:, M, Z] = 1j * om
    w[:, Z, M] = 0.5j * omc
    w[:, Z, Z] = -GAMMA
    w[:, Z, P] = -0.5j * om
    w[:, P, Z] = -1j * omc
    w[:, P, P] = -1j * det - 0.5 * GAMMA
    s = np.zeros((n, 3), dtype=complex)
    s[:, M] = -0.5j * om
    s[:, P] = 0.5j * omc
    return OneAtomTerms(w=w, s=s)


@dataclass(frozen=True)
class TwoAtomTensors:
    """Pair coupling tensors of the operator equations.

    Only four patterns are nonzero: V^{+1,+1} = -g-, V^{-1,-1} = -g+,
    U^{0,+1,-1} = -g+, U^{0,-1,+1} = -g-, U^{+1,0,+1} = 2 g-, and
    U^{-1,0,-1} = 2 g+.  The fast kernels consume g+- directly; the
    materialized v/u tensors feed the literal reference implementation and
    the sparsity tests.
    """

    g_plus: np.ndarray
    g_minus: np.ndarray
    gamma_nm: np.ndarray

    @property
    def n_atoms(self):
        return self.g_plus.shape[0]

    def v(self):
        n = self.n_atoms
        v = np.zeros((n, n, 3, 3), dtype=complex)
        v[:, :, P, P] = -self.g_minus
        v[:, :, M, M] = -self.g_plus
        return v

    def u(self):
        n = self.n_atoms
        u = np.zeros((n, n, 3, 3, 3), dtype=complex)
        u[:, :, Z, P, M] = -self.g_plus
        u[:, :, Z, M, P] = -self.g_minus
        u[:, :, P, Z, P] = 2.0 * self.g_minus
        u[:, :, M, Z, M] = 2.0 * self.g_plus
        return u


def build_two_atom_tensors(couplings: CouplingSet) -> TwoAtomTensors:
    return TwoAtomTensors(
        g_plus=couplings.g_plus,
        g_minus=couplings.g_minus,
        gamma_nm=couplings.gamma_nm,
    )
