"""Time-stepping glue between hierarchy states and the generic RK drivers."""

import numpy as np

from ..integrate import SteadyCriterion, StepControl, evolve, evolve_to_steady
from .backend import make_rhs
from .state import HierarchyState, build_one_atom_terms, build_two_atom_tensors


def hierarchy_rhs_callable(drive, couplings, order, backend="auto", linear=False):
    one_atom = build_one_atom_terms(drive)
    two_atom = build_two_atom_tensors(couplings)
    return make_rhs(drive.n_atoms, order, one_atom, two_atom,
                    backend=backend, linear=linear)


def steady_state_hierarchy(drive, couplings, order, *, state0=None,
                           backend="auto", linear=False, control=None,
                           criterion=None, tracked=None):
    """Evolve a hierarchy state until the tracked observables stop changing.

    By default every single-atom expectation value is tracked; scenarios that
    only need one aggregate (e.g. an ensemble mean excitation) can pass
    `tracked(vec) -> array` to stop as soon as that quantity settles.
    """
    n = drive.n_atoms
    control = control or StepControl(method="rk45", rtol=1e-9, atol=1e-12)
    criterion = criterion or SteadyCriterion()
    state0 = HierarchyState(n, order) if state0 is None else state0
    f = hierarchy_rhs_callable(drive, couplings, order, backend, linear)
    k = 3 * n
    if tracked is None:
        tracked = lambda vec: vec[:k]
    vec, t = evolve_to_steady(state0.data, f, criterion, control,
                              observables=tracked)
    return HierarchyState(n, state0.order, vec), t


def evolve_hierarchy(state0, drive, couplings, *, t_span, record_grid=None,
                     backend="auto", linear=False, control=None):
    """Fixed-window evolution; returns the final state or (times, states)."""
    control = control or StepControl(method="rk45", rtol=1e-9, atol=1e-12)
    f = hierarchy_rhs_callable(drive, couplings, state0.order, backend, linear)
    out = evolve(state0.data, f, control, t_span, record_grid=record_grid)
    if record_grid is None:
        return HierarchyState(state0.n_atoms, state0.order, out)
    times, vecs = out
    return times, [HierarchyState(state0.n_atoms, state0.order, v) for v in vecs]
