"""Physical outputs: scattering rates, directional intensity, resonance fits,
and the collective eigenmode decomposition."""

from dataclasses import dataclass

import numpy as np

from .core import GAMMA, DetectionDirection
from .cumulant.state import HierarchyState, get_expectation
from .errors import ConsistencyError, FitFailure, InvalidArgument, NumericalFailure
from .kernel import CouplingSet


def coherence_matrix(state_or_rho, n_atoms=None):
    """C[m, n] = <sigma+_m sigma-_n> with <e_n> on the diagonal.

    Accepts a HierarchyState (any order; order 1 closes the pair as a product
    of singles) or a dense density matrix.
    """
    if isinstance(state_or_rho, HierarchyState):
        state = state_or_rho
        n = state.n_atoms
        memo = {}
        c = np.zeros((n, n), dtype=complex)
        for m in range(n):
            c[m, m] = state.singles[m, 1]
            for l in range(n):
                if l != m:
                    c[m, l] = get_expectation(state, (m, l), (+1, -1), memo)
        return c
    from . import exact

    rho = state_or_rho.data if hasattr(state_or_rho, "data") else state_or_rho
    rho = np.asarray(rho)
    if n_atoms is None:
        n_atoms = int(np.log2(rho.shape[0]))
    return exact.pair_coherence_matrix(rho, n_atoms)


def singles_vector(state_or_rho, j, n_atoms=None):
    """<Q_n^j> for every atom."""
    if isinstance(state_or_rho, HierarchyState):
        return state_or_rho.singles[:, j + 1].copy()
    from . import exact

    rho = state_or_rho.data if hasattr(state_or_rho, "data") else state_or_rho
    rho = np.asarray(rho)
    if n_atoms is None:
        n_atoms = int(np.log2(rho.shape[0]))
    return np.array([exact.expect_multi(rho, [n], [j]) for n in range(n_atoms)])


@dataclass(frozen=True)
class ScatterRates:
    """Total, coherent (classical) and incoherent photon scattering rates."""

    gamma_total: float
    gamma_coherent: float

    @property
    def gamma_incoherent(self):
        return self.gamma_total - self.gamma_coherent


def scattering_rates(state_or_rho, couplings: CouplingSet, imag_tol=1e-9):
    """Collective scattering rates from pair coherences.

    gamma   = sum_n [ Gamma <e_n> + sum_{m != n} Gamma_mn <sigma+_m sigma-_n> ]
    gamma_C = the same with <sigma+_m><sigma-_n> products
    """
    c = coherence_matrix(state_or_rho)
    n = c.shape[0]
    gamma_full = couplings.gamma_nm + GAMMA * np.eye(n)
    total = np.sum(gamma_full * c)
    sp = singles_vector(state_or_rho, +1, n)
    sm = singles_vector(state_or_rho, -1, n)
    coherent = np.sum(gamma_full * np.outer(sp, sm))
    for name, val in (("gamma", total), ("gamma_C", coherent)):
        if abs(val.imag) > imag_tol:
            raise ConsistencyError(f"{name} has imaginary part {val.imag:.3e}")
    return ScatterRates(gamma_total=float(total.real),
                        gamma_coherent=float(coherent.real))


def delta_gamma_c(steady_mf, steady_lin, couplings: CouplingSet):
    """(gamma_C^lin - gamma_C) / gamma_C between matched steady states."""
    gc = scattering_rates(steady_mf, couplings).gamma_coherent
    gc_lin = scattering_rates(steady_lin, couplings).gamma_coherent
    if abs(gc) < 1e-14:
        raise NumericalFailure("gamma_C is degenerate (< 1e-14)")
    return (gc_lin - gc) / gc


def directional_intensity(state_or_rho, direction: DetectionDirection,
                          imag_tol=1e-8):
    """<sigma+ sigma-> of the phased collective operator along khat."""
    c = coherence_matrix(state_or_rho)
    val = np.sum(direction.phase_table * c)
    if abs(val.imag) > imag_tol:
        raise ConsistencyError(f"directional intensity has Im = {val.imag:.3e}")
    return float(val.real)


@dataclass(frozen=True)
class FitResult:
    center: float
    width: float
    amplitude: float
    offset: float
    residual_rms: float
    n_iter: int

    def __iter__(self):
        return iter((self.center, self.width, self.amplitude, self.offset))


def _lorentz(x, center, width, amplitude, offset):
    return amplitude / (1.0 + ((x - center) / width) ** 2) + offset


def _linear_ls(x, y, center, width):
    """Best (amplitude, offset) for fixed (center, width); model is linear."""
    basis = 1.0 / (1.0 + ((x - center) / width) ** 2)
    a = np.column_stack([basis, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    return coef[0], coef[1], float(np.sqrt(np.mean(resid**2)))


def lorentzian_fit(detunings, signal, max_iter=100):
    """Least-squares Lorentzian A / (1 + ((x - x0)/w)^2) + c.

    Deterministic: a coarse grid over (center, width) with the linear
    (amplitude, offset) subproblem solved exactly seeds a damped Gauss-Newton
    refinement.  Raises FitFailure if the refinement stalls without meeting
    the step tolerance.
    """
    x = np.asarray(detunings, dtype=float)
    y = np.asarray(signal, dtype=float)
    if x.size < 8:
        raise InvalidArgument("need at least 8 samples spanning the peak")
    if x.size != y.size:
        raise InvalidArgument("detunings and signal must have equal length")
    span = float(x.max() - x.min())
    if span <= 0:
        raise InvalidArgument("detunings must span a nonzero range")

    best = None
    for center in np.linspace(x.min(), x.max(), 41):
        for width in span * np.geomspace(0.02, 1.0, 12):
            amp, off, rms = _linear_ls(x, y, center, width)
            if best is None or rms < best[0]:
                best = (rms, center, width, amp, off)
    _, center, width, amp, off = best

    params = np.array([center, width, amp, off])
    scale = max(span, 1.0)
    for it in range(max_iter):
        c0, w0, a0, o0 = params
        u = (x - c0) / w0
        denom = 1.0 + u**2
        model = a0 / denom + o0
        r = y - model
        # analytic Jacobian of the model
        d_dc = a0 * 2.0 * u / (w0 * denom**2)
        d_dw = a0 * 2.0 * u**2 / (w0 * denom**2)
        d_da = 1.0 / denom
        d_do = np.ones_like(x)
        jac = np.column_stack([d_dc, d_dw, d_da, d_do])
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        lam = 1.0
        base = np.sum(r**2)
        for _ in range(25):
            trial = params + lam * step
            if abs(trial[1]) > 1e-12 * scale:
                rt = y - _lorentz(x, *trial)
                if np.sum(rt**2) <= base * (1.0 + 1e-14):
                    break
            lam *= 0.5
        else:
            raise FitFailure(
                f"damped Gauss-Newton stalled at iteration {it} "
                f"(rms {np.sqrt(base / x.size):.3e})"
            )
        params = trial
        if np.linalg.norm(lam * step) < 1e-12 * scale:
            break
    else:
        raise FitFailure(f"no convergence in {max_iter} iterations")
    center, width, amp, off = params
    rms = float(np.sqrt(np.mean((y - _lorentz(x, *params)) ** 2)))
    return FitResult(center=float(center), width=float(abs(width)),
                     amplitude=float(amp), offset=float(off),
                     residual_rms=rms, n_iter=it + 1)


@dataclass(frozen=True)
class ModeSet:
    """Eigenmodes of the complex symmetric coupling matrix g+ (with the
    Gamma/2 diagonal), sorted by decay rate 2 Re G, fastest first."""

    eigenvalues: np.ndarray
    modes: np.ndarray  # modes[alpha] is the n-vector u_alpha

    @property
    def decay_rates(self):
        return 2.0 * self.eigenvalues.real

    def mode(self, alpha):
        return self.modes[alpha]


def eigenmodes(couplings: CouplingSet, residual_tol=1e-10) -> ModeSet:
    """General (non-Hermitian) eigendecomposition of g+ with Gamma/2 diagonal.

    Modes are normalized to sum_n |u_n|^2 = 1 with the largest-magnitude
    component rotated to the positive real axis.
    """
    matrix = couplings.g_plus_with_diagonal()
    evals, vecs = np.linalg.eig(matrix)
    order = np.argsort(-2.0 * evals.real, kind="stable")
    evals = evals[order]
    vecs = vecs[:, order]
    modes = []
    for alpha in range(evals.size):
        u = vecs[:, alpha]
        u = u / np.linalg.norm(u)
        pivot = np.argmax(np.abs(u))
        phase = u[pivot] / abs(u[pivot])
        u = u / phase
        resid = np.max(np.abs(matrix @ u - evals[alpha] * u))
        if resid > residual_tol:
            raise NumericalFailure(
                f"eigenmode {alpha} residual {resid:.3e} > {residual_tol:.1e}"
            )
        modes.append(u)
    return ModeSet(eigenvalues=evals, modes=np.array(modes))
