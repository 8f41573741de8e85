"""Exact N-atom Lindblad dynamics: the oracle for every hierarchy test.

The computational basis indexes atoms by bits (bit n of the basis index set
means atom n excited, atom 0 is the least significant bit).  The density
matrix is stored dense; operators are applied through precomputed bit-index
gathers rather than a materialized superoperator, which keeps N = 10 usable
on a laptop.  A hard cap of N <= 12 guards against accidental 2^N blowup.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import GAMMA, AtomArray, DetectionDirection, DriveField
from .errors import (CapabilityError, ConsistencyError, InvalidArgument,
                     ProjectionDegenerateError)
from .integrate import SteadyCriterion, StepControl, evolve, evolve_to_steady
from .kernel import CouplingSet, coupling_set

MAX_ATOMS = 12
# Below this Hilbert dimension the non-Hermitian Hamiltonian is kept dense so
# the RHS rides on zgemm; above it sparse matvecs win on memory.
_DENSE_DIM = 2048


@dataclass(frozen=True)
class DensityMatrix:
    """Dense 2^N x 2^N state with basic physicality checks."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidArgument("density matrix must be square")
        n = int(np.log2(d.shape[0]))
        if 2**n != d.shape[0]:
            raise InvalidArgument("dimension must be a power of two")
        object.__setattr__(self, "data", d)

    @property
    def n_atoms(self):
        return int(np.log2(self.data.shape[0]))

    @classmethod
    def ground_state(cls, n_atoms):
        _check_n(n_atoms)
        rho = np.zeros((2**n_atoms, 2**n_atoms), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho)

    @classmethod
    def all_excited(cls, n_atoms):
        _check_n(n_atoms)
        rho = np.zeros((2**n_atoms, 2**n_atoms), dtype=complex)
        rho[-1, -1] = 1.0
        return cls(rho)

    def check_physical(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-8):
        """Raise ConsistencyError if Hermiticity/trace/positivity are violated."""
        d = self.data
        herm = np.max(np.abs(d - d.conj().T))
        if herm > herm_tol:
            raise ConsistencyError(f"Hermiticity violated by {herm:.3e}")
        tr = np.trace(d)
        if abs(tr - 1.0) > trace_tol:
            raise ConsistencyError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        evals = np.linalg.eigvalsh(0.5 * (d + d.conj().T))
        if evals.min() < -eig_tol:
            raise ConsistencyError(f"negative eigenvalue {evals.min():.3e}")


def _check_n(n):
    if n < 1:
        raise InvalidArgument("need at least one atom")
    if n > MAX_ATOMS:
        raise CapabilityError(
            f"exact solver capped at N = {MAX_ATOMS} (requested {n}); "
            "use a mean-field order instead"
        )


def _indices_bit_clear(n_atoms, n):
    """Basis indices whose bit n is 0, ascending."""
    idx = np.arange(2**n_atoms)
    return idx[(idx >> n) & 1 == 0]


class ExactSystem:
    """Precomputed Lindblad generator for one (drive, couplings) pair."""

    def __init__(self, drive: DriveField, couplings: CouplingSet):
        n = drive.n_atoms
        _check_n(n)
        if couplings.n_atoms != n:
            raise InvalidArgument("drive and couplings disagree on atom count")
        self.n_atoms = n
        self.dim = 2**n
        self.gamma_full = couplings.gamma_nm + GAMMA * np.eye(n)
        self._idx0 = [_indices_bit_clear(n, a) for a in range(n)]
        self._scratch = None

        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(np.broadcast_to(v, r.shape).astype(complex))

        all_idx = np.arange(self.dim)
        # -Delta_n e_n - (i/2) Gamma e_n on the diagonal
        diag = np.zeros(self.dim, dtype=complex)
        for a in range(n):
            excited = (all_idx >> a) & 1 == 1
            diag[excited] += -drive.detuning[a] - 0.5j * GAMMA
        add(all_idx, all_idx, diag)
        # (Omega+_n / 2) sigma+_n and h.c.
        for a in range(n):
            i0 = self._idx0[a]
            i1 = i0 + (1 << a)
            add(i1, i0, 0.5 * drive.rabi[a])
            add(i0, i1, 0.5 * np.conj(drive.rabi[a]))
        # [Omega_ab - (i/2) Gamma_ab] sigma+_a sigma-_b for a != b
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                coeff = couplings.omega_nm[a, b] - 0.5j * couplings.gamma_nm[a, b]
                if coeff == 0.0:
                    continue
                j = all_idx[((all_idx >> a) & 1 == 0) & ((all_idx >> b) & 1 == 1)]
                i = j + (1 << a) - (1 << b)
                add(i, j, coeff)

        h_nh = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        ).tocsr()
        if self.dim <= _DENSE_DIM:
            self._h_nh = h_nh.toarray()
            self._h_nh_dag = self._h_nh.conj().T.copy()
            self._dense = True
        else:
            self._h_nh = h_nh
            self._h_nh_dag = h_nh.conj().T.tocsr()
            self._dense = False


    def lowering_sandwich(self, rho, weights):
        """sum_{n,m} weights[n, m] sigma-_n rho sigma+_m.

        Batched over bit-sliced views of the state seen as a rank-2N tensor:
        stage one lowers every column bit (N strided copies), a single
        tensordot applies the weight matrix, and stage two lowers the row
        bits (N strided adds).  O(N dim^2) data movement plus one small gemm.
        """
        n = self.n_atoms
        dim = self.dim
        shape = (2,) * (2 * n)
        rho_t = rho.reshape(shape)
        if self._scratch is None:
            self._scratch = (np.zeros((n, dim, dim), dtype=complex),
                             np.empty((n, dim * dim), dtype=complex))
        lowered, mixed = self._scratch
        full = [slice(None)] * (2 * n)
        for b in range(n):
            cb = 2 * n - 1 - b  # C-order: last axis is the least significant column bit
            src = list(full)
            dst = list(full)
            src[cb] = 1
            dst[cb] = 0
            lowered[b].reshape(shape)[tuple(dst)] = rho_t[tuple(src)]
        np.matmul(np.asarray(weights, dtype=complex),
                  lowered.reshape(n, dim * dim), out=mixed)
        out = np.zeros_like(rho)
        out_t = out.reshape(shape)
        for a in range(n):
            ra = n - 1 - a
            src = list(full)
            dst = list(full)
            src[ra] = 1
            dst[ra] = 0
            out_t[tuple(dst)] += mixed[a].reshape(shape)[tuple(src)]
        return out

    def rhs(self, t, rho):
        """d rho / dt under the full dipole-coupled Lindblad generator."""
        if self._dense:
            comm = self._h_nh @ rho - rho @ self._h_nh_dag
        else:
            comm = self._h_nh.dot(rho) - self._h_nh_dag.T.dot(rho.T).T
        return -1j * comm + self.lowering_sandwich(rho, self.gamma_full)


def lindblad_rhs(rho, drive: DriveField, couplings: CouplingSet):
    """One-shot RHS evaluation (builds the generator each call; use
    ExactSystem for time stepping)."""
    rho = np.asarray(rho, dtype=complex)
    system = ExactSystem(drive, couplings)
    if rho.shape != (system.dim, system.dim):
        raise InvalidArgument(
            f"rho has shape {rho.shape}, expected {(system.dim, system.dim)}"
        )
    return system.rhs(0.0, rho)


_PATTERNS = {-1: (0, 1), 0: (1, 1), +1: (1, 0)}  # j -> (row bit, column bit)


def expect_multi(rho, indices, js):
    """<Q_{n1}^{j1} ... Q_{nk}^{jk}> for distinct atoms n_i.

    Reduction identities for repeated atoms (sigma+ sigma- = e and friends)
    are the caller's job; repeated indices are rejected.
    """
    rho = np.asarray(rho)
    n_atoms = int(np.log2(rho.shape[0]))
    indices = list(indices)
    js = list(js)
    if len(indices) != len(js):
        raise InvalidArgument("indices and js must have equal length")
    if len(set(indices)) != len(indices):
        raise InvalidArgument(f"repeated atom index in {indices}")
    for n in indices:
        if not 0 <= n < n_atoms:
            raise InvalidArgument(f"atom index {n} out of range")
    row_base = 0
    col_base = 0
    for n, j in zip(indices, js):
        rbit, cbit = _PATTERNS[j]
        row_base += rbit << n
        col_base += cbit << n
    free = np.zeros(1, dtype=np.intp)
    for a in range(n_atoms):
        if a not in indices:
            free = np.concatenate([free, free + (1 << a)])
    # Tr[A rho] = sum over matching (row, col) patterns of rho[col, row]
    return complex(rho[col_base + free, row_base + free].sum())


def expect_single(rho, n, j):
    """<Q_n^j> with j in {-1, 0, +1}."""
    return expect_multi(rho, [n], [j])


def pair_coherence_matrix(rho, n_atoms):
    """C[m, n] = <sigma+_m sigma-_n>, with C[n, n] = <e_n>."""
    c = np.zeros((n_atoms, n_atoms), dtype=complex)
    for m in range(n_atoms):
        c[m, m] = expect_multi(rho, [m], [0])
        for n in range(n_atoms):
            if n != m:
                c[m, n] = expect_multi(rho, [m, n], [+1, -1])
    return c


def detector_expectation(rho, direction: DetectionDirection, imag_tol=1e-10):
    """<sigma+ sigma-> of the phased collective lowering operator.

    Equals sum_n <e_n> + sum_{m != n} e^{i phi_mn} <sigma+_m sigma-_n>; the
    imaginary residue must stay below imag_tol.
    """
    rho = np.asarray(rho)
    n_atoms = int(np.log2(rho.shape[0]))
    c = pair_coherence_matrix(rho, n_atoms)
    val = np.sum(direction.phase_table * c)
    if abs(val.imag) > imag_tol:
        raise ConsistencyError(f"detector expectation has Im = {val.imag:.3e}")
    return float(val.real)


def project_detection(rho, direction: DetectionDirection, norm_tol=1e-14):
    """Apply the detection map rho -> sigma- rho sigma+ (unnormalized).

    Returns (projected, norm); the caller divides by norm to mirror the
    explicit bookkeeping of the two-time recipe.  norm equals the detector
    expectation of rho.
    """
    rho = np.asarray(rho, dtype=complex)
    n_atoms = int(np.log2(rho.shape[0]))
    weights = direction.phase_table.conj()  # weights[l, m] = e^{i k.(R_m - R_l)}
    dummy_drive = DriveField(rabi=np.zeros(n_atoms), detuning=np.zeros(n_atoms))
    system = _sandwich_system(n_atoms, dummy_drive)
    projected = system.lowering_sandwich(rho, weights)
    norm = np.trace(projected)
    if abs(norm.imag) > 1e-10 * max(1.0, abs(norm.real)):
        raise ConsistencyError(f"projection norm has Im = {norm.imag:.3e}")
    norm = float(norm.real)
    if norm <= norm_tol:
        raise ProjectionDegenerateError(f"projection norm {norm:.3e} <= {norm_tol:.1e}")
    return projected, norm


_sandwich_cache = {}


def _sandwich_system(n_atoms, drive):
    """Cheap ExactSystem reused only for its bit-index tables."""
    if n_atoms not in _sandwich_cache:
        zero = CouplingSet(
            gamma_nm=np.zeros((n_atoms, n_atoms)),
            omega_nm=np.zeros((n_atoms, n_atoms)),
            g_plus=np.zeros((n_atoms, n_atoms), dtype=complex),
            g_minus=np.zeros((n_atoms, n_atoms), dtype=complex),
        )
        _sandwich_cache[n_atoms] = ExactSystem(drive, zero)
    return _sandwich_cache[n_atoms]


def steady_state(array: AtomArray, drive: DriveField, *, couplings=None,
                 control=None, criterion=None, rho0=None):
    """Evolve from rho0 (default: ground) until all singles are steady.

    Returns (rho, t_steady)."""
    couplings = coupling_set(array) if couplings is None else couplings
    system = ExactSystem(drive, couplings)
    control = control or StepControl(method="rk45", rtol=1e-9, atol=1e-12)
    criterion = criterion or SteadyCriterion()
    rho0 = DensityMatrix.ground_state(array.n_atoms).data if rho0 is None else rho0

    def singles(rho):
        vals = []
        for a in range(array.n_atoms):
            for j in (-1, 0, +1):
                vals.append(expect_multi(rho, [a], [j]))
        return np.array(vals)

    return evolve_to_steady(rho0, system.rhs, criterion, control, observables=singles)


@dataclass
class G2Result:
    """Two-time correlation curve plus the bookkeeping used to form it."""

    tau: np.ndarray
    values: np.ndarray
    norm: float
    t_steady: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def asymptote(self):
        return float(self.values[-1])


def g2_exact(array: AtomArray, drive: DriveField, direction: DetectionDirection,
             tau_grid, *, couplings=None, control=None, criterion=None,
             rho_steady=None, t_steady=0.0):
    """Normalized intensity-intensity correlation of the detected light.

    Pipeline: steady state (computed here unless rho_steady is supplied),
    detection projection with explicit normalization, re-evolution under the
    same generator, and the detector expectation divided by the steady norm
    on tau_grid.
    """
    couplings = coupling_set(array) if couplings is None else couplings
    control = control or StepControl(method="rk45", rtol=1e-9, atol=1e-12)
    if rho_steady is None:
        rho_steady, t_steady = steady_state(
            array, drive, couplings=couplings, control=control, criterion=criterion
        )
    projected, norm = project_detection(rho_steady, direction)
    rho_reset = projected / norm
    system = ExactSystem(drive, couplings)
    tau_grid = np.asarray(tau_grid, dtype=float)
    _, samples = evolve(rho_reset, system.rhs, control, (0.0, tau_grid[-1]),
                        record_grid=tau_grid)
    values = np.array([detector_expectation(s, direction, imag_tol=1e-8) / norm
                       for s in samples])
    return G2Result(tau=tau_grid, values=values, norm=norm, t_steady=t_steady)
