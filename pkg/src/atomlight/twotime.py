"""Two-time correlations at the hierarchy level.

A photon detection along khat maps the state through
rho -> sigma- rho sigma+ / norm with the phased collective operator
sigma- = sum_l exp(-i k.R_l) sigma-_l.  Every post-detection expectation
value of a product A of single-atom operators follows from one rule,

    <A>_post * norm = sum_{m,l} e^{i phi_ml} <sigma+_m A sigma-_l>_pre ,

where collisions between m, l and the atoms of A reduce by the two-level
algebra (sigma+ sigma- = e, sigma+ e = 0, e sigma- = 0, squares vanish).
The reduction engine below generates every (j, j', j'') combination of the
reset tensors from that single rule; values two orders above the stored
tensors are closed by the recursive zero-cumulant rule of the state module.

The g2(tau) pipeline is: steady state, reset, re-evolution with the same
right-hand side, detector expectation divided by the steady norm.
"""

from dataclasses import dataclass

import numpy as np

from .core import DetectionDirection, DriveField
from .cumulant.driver import (evolve_hierarchy, hierarchy_rhs_callable,
                              steady_state_hierarchy)
from .cumulant.state import (HierarchyState, get_expectation, pair_table,
                             triple_table)
from .errors import (ConsistencyError, InvalidArgument,
                     ProjectionDegenerateError)
from .exact import G2Result
from .integrate import SteadyCriterion, StepControl, evolve
from .observables import coherence_matrix

_JS = (-1, 0, +1)


def _reduce_sandwich(atoms, js, m, l):
    """Reduce sigma+_m (prod_i Q_{atoms_i}^{js_i}) sigma-_l.

    Returns (atoms', js') of the surviving distinct-atom product, or None if
    the product vanishes.  sigma+ multiplies from the left, sigma- from the
    right, so sigma- sigma+ orderings never occur.
    """
    ops = dict(zip(atoms, js))
    if m == l:
        if m in ops:
            return None  # sigma+ X sigma- on one atom vanishes for X in {e, s+-}
        ops[m] = 0
    else:
        x = ops.get(m)
        if x is None:
            ops[m] = +1
        elif x == -1:
            ops[m] = 0  # sigma+ sigma- = e
        else:
            return None  # sigma+ e = 0, sigma+ sigma+ = 0
        x = ops.get(l)
        if x is None:
            ops[l] = -1
        elif x == +1:
            ops[l] = 0  # sigma+ sigma- = e
        else:
            return None  # e sigma- = 0, sigma- sigma- = 0
    items = sorted(ops.items())
    return tuple(a for a, _ in items), tuple(j for _, j in items)


def _post_value(state, phase, atoms, js, memo):
    """Unnormalized post-detection expectation of one operator product."""
    n = state.n_atoms
    total = 0.0 + 0.0j
    for m in range(n):
        for l in range(n):
            reduced = _reduce_sandwich(atoms, js, m, l)
            if reduced is None:
                continue
            total += phase[m, l] * get_expectation(state, reduced[0], reduced[1], memo)
    return total


def detector_value(state, direction: DetectionDirection, imag_tol=1e-8):
    """<sigma+ sigma-> from hierarchy tensors (needs stored pairs).

    May legitimately be negative for post-reset mean-field states; no
    positivity check is applied here.
    """
    if state.order < 2:
        raise InvalidArgument("detector expectation needs stored pairs (order >= 2)")
    c = coherence_matrix(state)
    val = np.sum(direction.phase_table * c)
    if abs(val.imag) > imag_tol:
        raise ConsistencyError(f"detector value has Im = {val.imag:.3e}")
    return float(val.real)


def reset_norm(state, direction: DetectionDirection, norm_tol=1e-14,
               imag_tol=1e-10):
    """Trace of the unnormalized reset state; equals the detector expectation."""
    val = detector_value(state, direction, imag_tol=imag_tol)
    if val <= norm_tol:
        raise ProjectionDegenerateError(f"reset norm {val:.3e} <= {norm_tol:.1e}")
    return val


@dataclass(frozen=True)
class ResetSnapshot:
    """Frozen pre-detection state, its reset norm, and the post state."""

    pre_state: HierarchyState
    norm: float
    post_state: HierarchyState


def reset_expectations(state, direction: DetectionDirection,
                       norm_tol=1e-14) -> ResetSnapshot:
    """Every post-detection single/pair/triple, evaluated on the frozen input.

    Above-order inputs (up to order + 2 operators) are closed recursively by
    the zero-cumulant rule; all j combinations are generated by the sandwich
    reduction, so no conjugation completion pass is needed.
    """
    if state.order < 2:
        raise InvalidArgument("reset needs stored pairs (order >= 2)")
    pre = state.copy()
    n = pre.n_atoms
    phase = direction.phase_table
    norm = reset_norm(pre, direction, norm_tol=norm_tol)
    memo = {}
    post = pre.zeros_like()
    for a in range(n):
        for ja in _JS:
            post.singles[a, ja + 1] = _post_value(pre, phase, (a,), (ja,), memo)
    pid = pair_table(n)
    for a in range(n):
        for b in range(a + 1, n):
            for ja in _JS:
                for jb in _JS:
                    post.pairs[pid[a, b], ja + 1, jb + 1] = _post_value(
                        pre, phase, (a, b), (ja, jb), memo)
    if pre.order >= 3:
        tid = triple_table(n)
        for a in range(n):
            for b in range(a + 1, n):
                for c in range(b + 1, n):
                    for ja in _JS:
                        for jb in _JS:
                            for jc in _JS:
                                post.triples[
                                    tid[a, b, c], ja + 1, jb + 1, jc + 1
                                ] = _post_value(pre, phase, (a, b, c),
                                                (ja, jb, jc), memo)
    post.data /= norm
    return ResetSnapshot(pre_state=pre, norm=norm, post_state=post)


def pair_population_extrema(state):
    """(most negative, largest) real part of <e_n e_m> over stored pairs.

    The negativity monitor of the reset diagnostics: mean-field resets can
    produce unphysical negative pair populations, which are recorded but
    never clamped.
    """
    if state.pairs is None or not state.pairs.size:
        return 0.0, 0.0
    ee = state.pairs[:, 1, 1].real
    return float(ee.min()), float(ee.max())


def g2_hierarchy(array, drive: DriveField, couplings, direction, order,
                 tau_grid, *, backend="auto", control=None, criterion=None,
                 steady=None, t_steady=0.0, imag_tol=1e-8):
    """g2(tau) for the detected direction at hierarchy order 2 or 3.

    Steps: steady state (computed here unless `steady` is given), detection
    reset on the frozen steady state, re-evolution of the post state with the
    same right-hand side, and detector/norm on tau_grid.  Diagnostics carry
    the post-reset pair-population extrema and the large-tau asymptote.
    """
    if order not in (2, 3):
        raise InvalidArgument("g2 needs stored pairs: order 2 or 3")
    control = control or StepControl(method="rk45", rtol=1e-9, atol=1e-12)
    if steady is None:
        criterion = criterion or SteadyCriterion()
        steady, t_steady = steady_state_hierarchy(
            drive, couplings, order, backend=backend, control=control,
            criterion=criterion)
    snapshot = reset_expectations(steady, direction)
    f = hierarchy_rhs_callable(drive, couplings, order, backend=backend)
    tau_grid = np.asarray(tau_grid, dtype=float)
    _, vecs = evolve(snapshot.post_state.data, f, control, (0.0, tau_grid[-1]),
                     record_grid=tau_grid)
    values = np.array([
        detector_value(HierarchyState(array.n_atoms, order, v), direction,
                       imag_tol=imag_tol) / snapshot.norm
        for v in vecs
    ])
    neg, pos = pair_population_extrema(snapshot.post_state)
    diagnostics = {
        "min_pair_population": neg,
        "max_pair_population": pos,
        "asymptote": float(values[-1]),
    }
    return G2Result(tau=tau_grid, values=values, norm=snapshot.norm,
                    t_steady=t_steady, diagnostics=diagnostics)
