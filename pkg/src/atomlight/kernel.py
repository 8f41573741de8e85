"""Dipole-dipole propagator and pairwise coupling constants.

The complex pair coupling is

    g(R) = (Gamma/2) [ h0(kR) + c(theta) h2(kR) ]

with h0, h2 the outgoing spherical Hankel functions, theta the angle between
R and the z axis, and c(theta) the transition-dependent angular factor
(P2(cos theta) for a Delta M = 0 transition, -P2(cos theta)/2 for
Delta M = +-1).  Collective decay and coherent exchange follow as
Gamma_nm = 2 Re g, Omega_nm = Im g, and g+- = +-i Omega_nm + Gamma_nm / 2.
"""

from dataclasses import dataclass

import numpy as np

from .core import GAMMA, WAVENUMBER, AtomArray, TransitionKind
from .errors import InvalidArgument, SingularityError

# Below this dimensionless separation the 1/s^3 near field would overwhelm
# the integrator; treat it as a geometry error instead of returning it.
S_MIN = 1e-6


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise InvalidArgument("spherical Hankel functions require s > 0")
    return s


def spherical_hankel_h0(s):
    """h0(s) = e^{is} / (i s) = sin(s)/s - i cos(s)/s.  Accepts scalars or arrays."""
    s = _check_s(s)
    val = np.sin(s) / s - 1j * np.cos(s) / s
    return complex(val) if val.ndim == 0 else val


def _j2_series(s):
    """Power series for j2(s); converges to machine precision for s <= 1.5."""
    s2 = s * s
    term = s2 / 15.0
    total = term.copy() if isinstance(term, np.ndarray) else term
    k = 1
    while True:
        term = term * (-0.5 * s2) / (k * (2 * k + 5))
        total = total + term
        k += 1
        if np.all(np.abs(term) <= 1e-18 * np.abs(total)) or k > 40:
            return total


def spherical_hankel_h2(s):
    """h2(s) = (-3i/s^3 - 3/s^2 + i/s) e^{is}.  Accepts scalars or arrays.

    The real part j2(s) suffers catastrophic cancellation for small s (the
    3/s^3 pieces cancel to leave O(s^2)); below s = 1 it is evaluated by
    series instead.  The imaginary part y2(s) is dominated by its leading
    term and is safe to evaluate directly.
    """
    s = _check_s(s)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    sin_s, cos_s = np.sin(s), np.cos(s)
    real = (3.0 / s**3 - 1.0 / s) * sin_s - 3.0 * cos_s / s**2
    small = s < 1.0
    if np.any(small):
        real = np.where(small, _j2_series(np.where(small, s, 1.0)), real)
    imag = (1.0 / s - 3.0 / s**3) * cos_s - 3.0 * sin_s / s**2
    val = real + 1j * imag
    return complex(val[0]) if scalar else val


def _angular_factor(cos_theta, transition: TransitionKind):
    p2 = 0.5 * (3.0 * cos_theta**2 - 1.0)
    if transition is TransitionKind.DELTA_M0:
        return p2
    return -0.5 * p2


def _green_many(rvec, transition: TransitionKind):
    """g(R) for an (..., 3) stack of separation vectors."""
    rvec = np.asarray(rvec, dtype=float)
    r = np.linalg.norm(rvec, axis=-1)
    s = WAVENUMBER * r
    if np.any(s < S_MIN):
        raise SingularityError(
            f"separation {np.min(r):.3e} lambda is below the near-field cutoff"
        )
    cos_theta = rvec[..., 2] / r
    c = _angular_factor(cos_theta, transition)
    return 0.5 * GAMMA * (spherical_hankel_h0(s) + c * spherical_hankel_h2(s))


def green_g(rvec, transition: TransitionKind):
    """Complex pair coupling g(R) for a single separation vector."""
    rvec = np.asarray(rvec, dtype=float)
    if rvec.shape != (3,):
        raise InvalidArgument(f"rvec must be a 3-vector, got shape {rvec.shape}")
    if np.linalg.norm(rvec) == 0.0:
        raise SingularityError("zero separation")
    return complex(_green_many(rvec, transition))


@dataclass(frozen=True)
class CouplingSet:
    """Pairwise couplings Gamma_nm, Omega_nm and g+-_nm for one geometry.

    All pair matrices are defined for m != n and carry zero diagonals; the
    eigenmode routine adds the Gamma/2 single-atom diagonal to g_plus itself
    (a constant diagonal shifts eigenvalues uniformly without touching the
    eigenvectors).  g_minus is the entrywise conjugate of g_plus.
    """

    gamma_nm: np.ndarray
    omega_nm: np.ndarray
    g_plus: np.ndarray
    g_minus: np.ndarray

    def __post_init__(self):
        for name in ("gamma_nm", "omega_nm", "g_plus", "g_minus"):
            getattr(self, name).setflags(write=False)

    @property
    def n_atoms(self):
        return self.gamma_nm.shape[0]

    def g_plus_with_diagonal(self):
        """g_plus plus the Gamma/2 diagonal, as used by the eigenmode problem."""
        return self.g_plus + 0.5 * GAMMA * np.eye(self.n_atoms)


def coupling_set(array: AtomArray) -> CouplingSet:
    """Assemble all pair couplings for an atom array."""
    n = array.n_atoms
    rvec = array.separations()
    r = np.linalg.norm(rvec, axis=-1)
    off = ~np.eye(n, dtype=bool)
    if n > 1:
        smallest = np.min(r[off])
        if WAVENUMBER * smallest < S_MIN:
            pair = np.argwhere((r <= smallest) & off)[0]
            raise SingularityError(
                f"atoms {pair[0]} and {pair[1]} are separated by {smallest:.3e} lambda"
            )
    g = np.zeros((n, n), dtype=complex)
    if n > 1:
        g[off] = _green_many(rvec[off], array.transition)
    gamma_nm = 2.0 * g.real
    omega_nm = g.imag.copy()
    g_plus = 1j * omega_nm + 0.5 * gamma_nm
    return CouplingSet(
        gamma_nm=gamma_nm,
        omega_nm=omega_nm,
        g_plus=g_plus,
        g_minus=np.conj(g_plus),
    )
