import numpy as np
import pytest

import atomlight as al
from atomlight import cumulant


def symmetrize_state(state):
    """Impose the Hermitian-pairing symmetry <Q^j..> = conj(<Q^-j..>)."""
    rev = slice(None, None, -1)
    state.singles[:] = 0.5 * (state.singles + np.conj(state.singles[:, rev]))
    if state.pairs is not None:
        state.pairs[:] = 0.5 * (state.pairs + np.conj(state.pairs[:, rev, rev]))
    if state.triples is not None:
        state.triples[:] = 0.5 * (
            state.triples + np.conj(state.triples[:, rev, rev, rev]))
    return state


def random_state(n, order, seed, scale=1.0, hermitian=False):
    state = cumulant.HierarchyState(n, order)
    rng = np.random.default_rng(seed)
    state.data[:] = scale * (rng.normal(size=state.data.shape)
                             + 1j * rng.normal(size=state.data.shape))
    if hermitian:
        symmetrize_state(state)
    return state


def random_density_matrix(n, seed):
    rng = np.random.default_rng(seed)
    dim = 2**n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def triangle3():
    """Non-collinear 3-atom geometry with oblique drive: stresses every
    coupling path."""
    pos = np.array([[0.0, 0.0, 0.0], [0.32, 0.11, 0.0], [0.1, 0.4, 0.18]])
    arr = al.AtomArray(positions=pos, transition=al.TransitionKind.DELTA_MPM1)
    cpl = al.coupling_set(arr)
    drv = al.DriveField(rabi=np.array([0.5 + 0.2j, -0.3 + 0.4j, 0.7]),
                        detuning=np.array([0.3, -0.2, 0.1]))
    return arr, cpl, drv


@pytest.fixture
def pair2():
    arr = al.build_line_array(2, 0.4, [0, 1, 0], al.TransitionKind.DELTA_M0)
    cpl = al.coupling_set(arr)
    drv = al.plane_wave_drive(arr, 0.5, [1, 0, 0], 0.3)
    return arr, cpl, drv
