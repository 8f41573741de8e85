"""Backend selection: compiled kernels vs. vectorized numpy.

The Cython extension is picked up at import time when available.  For small
arrays the loop kernels win (no per-call einsum overhead); for large arrays
the numpy path rides BLAS and overtakes them.  "auto" switches at
AUTO_CUTOFF atoms; benchmarks/bench_rhs.py measures the actual crossover on
a given machine, and ATOMLIGHT_BACKEND=numpy|cython forces a choice
globally.
"""

import os

import numpy as np

from ..errors import InvalidArgument
from . import numpy_rhs
from .state import HierarchyState, pair_table, triple_table

try:
    from .. import _kernels
except ImportError:  # pragma: no cover - exercised only in pure-python installs
    _kernels = None

# Measured single-core crossovers vs the BLAS-backed numpy path; order 1 is
# a handful of small matvecs either way, so the loop kernel always wins.
AUTO_CUTOFF = {1: 10**9, 2: 20, 3: 28}

HAVE_KERNELS = _kernels is not None


def select_backend(n_atoms, backend="auto", order=2):
    env = os.environ.get("ATOMLIGHT_BACKEND")
    if env:
        backend = env
    if backend == "auto":
        cutoff = AUTO_CUTOFF.get(order, 20)
        return "cython" if (HAVE_KERNELS and n_atoms <= cutoff) else "numpy"
    if backend == "cython":
        if not HAVE_KERNELS:
            raise InvalidArgument("compiled kernels are not available in this install")
        return "cython"
    if backend == "numpy":
        return "numpy"
    raise InvalidArgument(f"unknown backend {backend!r}")


def _cython_rhs(state, one_atom, two_atom):
    n = state.n_atoms
    deriv = state.zeros_like()
    pid = pair_table(n)
    gp = np.ascontiguousarray(two_atom.g_plus, dtype=complex)
    gm = np.ascontiguousarray(two_atom.g_minus, dtype=complex)
    gam = np.ascontiguousarray(two_atom.gamma_nm, dtype=complex)
    if state.order == 1:
        _kernels.rhs_order1(state.singles, one_atom.w, one_atom.s, gp, gm,
                            deriv.singles)
    elif state.order == 2:
        _kernels.rhs_order2(state.singles, state.pairs, pid, one_atom.w,
                            one_atom.s, gp, gm, gam, deriv.singles, deriv.pairs)
    else:
        tid = triple_table(n)
        _kernels.rhs_order3(state.singles, state.pairs, state.triples, pid,
                            tid, one_atom.w, one_atom.s, gp, gm, gam,
                            deriv.singles, deriv.pairs, deriv.triples)
    return deriv


def rhs(state, one_atom, two_atom, backend="auto"):
    """Hierarchy right-hand side with backend dispatch."""
    chosen = select_backend(state.n_atoms, backend, state.order)
    if chosen == "cython":
        return _cython_rhs(state, one_atom, two_atom)
    return numpy_rhs.rhs(state, one_atom, two_atom)


def rhs_linear(state, one_atom, two_atom):
    """Weak-drive linearization (order 1 only); numpy is always fast enough."""
    if state.order != 1:
        raise InvalidArgument("linear approximation is defined for order-1 states")
    return numpy_rhs.rhs_linear(state, one_atom, two_atom)


def make_rhs(n_atoms, order, one_atom, two_atom, backend="auto", linear=False):
    """Flat-vector RHS callable for the Runge-Kutta drivers.

    Backend choice happens once here, not per evaluation.
    """
    if linear:
        if order != 1:
            raise InvalidArgument("linear approximation requires order 1")

        def f(t, vec):
            state = HierarchyState(n_atoms, order, vec)
            return rhs_linear(state, one_atom, two_atom).data

        return f

    chosen = select_backend(n_atoms, backend, order)
    if chosen == "cython":
        def f(t, vec):
            state = HierarchyState(n_atoms, order, vec)
            return _cython_rhs(state, one_atom, two_atom).data
    else:
        def f(t, vec):
            state = HierarchyState(n_atoms, order, vec)
            return numpy_rhs.rhs(state, one_atom, two_atom).data
    return f
