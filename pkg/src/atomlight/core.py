"""Domain types and geometry/drive constructors shared by every solver.

Natural units are used throughout: the single-atom decay rate Gamma is 1
(times are in units of 1/Gamma) and the transition wavelength lambda is 1
(lengths are in units of lambda, so the wave number is k = 2*pi).  Physical
units only appear at configuration parsing, never inside the solvers.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidArgument, NumericalFailure

GAMMA = 1.0
WAVELENGTH = 1.0
WAVENUMBER = 2.0 * np.pi / WAVELENGTH


@dataclass(frozen=True)
class NaturalUnits:
    """Unit system marker: decay rate and wavelength both equal one."""

    gamma: float = GAMMA
    wavelength: float = WAVELENGTH

    @property
    def k(self):
        return 2.0 * np.pi / self.wavelength


class TransitionKind(Enum):
    """Angular character of the two-level transition.

    Selects the coefficient of the l=2 spherical-Hankel term in the dipole
    propagator: +P2(cos theta) for DELTA_M0 (linear dipole along z) and
    -P2(cos theta)/2 for DELTA_MPM1 (circular dipole in the xy plane), with
    theta measured from the z axis.
    """

    DELTA_M0 = "delta_m0"
    DELTA_MPM1 = "delta_mpm1"


def _as_unit_vector(v, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise InvalidArgument(f"{name} must be a 3-vector, got shape {v.shape}")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-9:
        raise InvalidArgument(f"{name} must be a unit vector, |{name}| = {norm:.3e}")
    return v / norm


@dataclass(frozen=True)
class AtomArray:
    """Fixed atom positions (units of lambda) plus the transition character.

    Positions are immutable after construction; every pair must be separated
    by a strictly positive distance.
    """

    positions: np.ndarray
    transition: TransitionKind

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise InvalidArgument(f"positions must be (n, 3), got {pos.shape}")
        if pos.shape[0] < 1:
            raise InvalidArgument("need at least one atom")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        if np.any(dist <= 0.0):
            n, m = np.argwhere(dist <= 0.0)[0]
            raise InvalidArgument(f"atoms {n} and {m} coincide")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self):
        return self.positions.shape[0]

    def separations(self):
        """Pairwise displacement vectors R_n - R_m, shape (n, n, 3)."""
        return self.positions[:, None, :] - self.positions[None, :, :]


@dataclass(frozen=True)
class DriveField:
    """Per-atom complex Rabi frequency Omega^+_n and real detuning Delta_n.

    Only Omega^+ is stored; Omega^- is its complex conjugate by definition.
    Units of Gamma.
    """

    rabi: np.ndarray
    detuning: np.ndarray

    def __post_init__(self):
        rabi = np.array(self.rabi, dtype=complex)
        det = np.array(self.detuning, dtype=float)
        if rabi.ndim != 1 or det.shape != rabi.shape:
            raise InvalidArgument("rabi and detuning must be matching 1-d arrays")
        rabi.setflags(write=False)
        det.setflags(write=False)
        object.__setattr__(self, "rabi", rabi)
        object.__setattr__(self, "detuning", det)

    @property
    def n_atoms(self):
        return self.rabi.shape[0]


@dataclass(frozen=True)
class DetectionDirection:
    """Emission direction and the phase table it induces on the array.

    phase_table[m, l] = exp(i k . (R_m - R_l)) with k = 2*pi*khat.  The table
    is entrywise unit modulus, Hermitian-conjugate symmetric, with unit
    diagonal.
    """

    khat: np.ndarray
    phase_table: np.ndarray = field(repr=False)

    @classmethod
    def from_array(cls, array: AtomArray, khat) -> "DetectionDirection":
        khat = _as_unit_vector(khat, "khat")
        kvec = WAVENUMBER * khat
        phases = array.positions @ kvec
        table = np.exp(1j * (phases[:, None] - phases[None, :]))
        khat.setflags(write=False)
        table.setflags(write=False)
        return cls(khat=khat, phase_table=table)


def build_line_array(n, spacing, axis, transition: TransitionKind) -> AtomArray:
    """Equally spaced chain: positions j*spacing*axis for j = 0..n-1."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    if spacing <= 0:
        raise InvalidArgument(f"spacing must be positive, got {spacing}")
    axis = _as_unit_vector(axis, "axis")
    positions = np.arange(n)[:, None] * spacing * axis[None, :]
    return AtomArray(positions=positions, transition=transition)


def _gouy_root(j, k_trap, rayleigh_range):
    """Solve k z - arctan(z / Z_R) = j pi for z.

    f is strictly increasing (f' = k - Z_R/(Z_R^2+z^2) > 0 whenever
    k Z_R > 1), so bisection from a bracket around j*pi/k always converges;
    Newton polishing brings the root to ~1e-12 lambda.
    """

    def f(z):
        return k_trap * z - np.arctan(z / rayleigh_range) - j * np.pi

    def fprime(z):
        return k_trap - rayleigh_range / (rayleigh_range**2 + z**2)

    guess = j * np.pi / k_trap
    half = 0.6 * np.pi / k_trap
    lo, hi = guess - half, guess + half
    if f(lo) > 0 or f(hi) < 0:
        raise NumericalFailure(f"standing-wave root bracket failed at site {j}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    for _ in range(8):
        step = f(z) / fprime(z)
        z -= step
        if abs(step) < 1e-14:
            break
    if abs(f(z)) > 1e-10:
        raise NumericalFailure(f"standing-wave root refinement failed at site {j}")
    return z


def standing_wave_sites(n_sites, trap_wavelength_ratio, waist):
    """z positions of the trap intensity maxima, centered on the focus.

    Sites are the zeros of sin(k z - arctan(z / Z_R)) with k the trap wave
    number and Z_R = pi w0^2 / lambda_trap the Rayleigh range; all lengths in
    units of the transition wavelength.
    """
    if n_sites < 1:
        raise InvalidArgument("n_sites must be positive")
    if trap_wavelength_ratio <= 0 or waist <= 0:
        raise InvalidArgument("trap parameters must be positive")
    k_trap = 2.0 * np.pi / trap_wavelength_ratio
    rayleigh = np.pi * waist**2 / trap_wavelength_ratio
    j0 = -(n_sites // 2)
    return np.array(
        [_gouy_root(j, k_trap, rayleigh) for j in range(j0, j0 + n_sites)]
    ), rayleigh


def build_standing_wave_array(
    seed,
    n_sites,
    fill_probability,
    trap_wavelength_ratio,
    waist,
    sigma_rho,
    transition: TransitionKind,
) -> AtomArray:
    """Randomly filled standing-wave trap along z.

    Each intensity maximum is occupied with probability fill_probability;
    occupied sites get independent Gaussian transverse scatter of standard
    deviation sigma_rho in x and y.  The RNG is numpy's PCG64 seeded with
    `seed`; draws happen in site order (one uniform per site, then one (x, y)
    normal pair per occupied site), which pins the stream layout across
    platforms and versions.
    """
    if not 0.0 <= fill_probability <= 1.0:
        raise InvalidArgument("fill_probability must lie in [0, 1]")
    if sigma_rho < 0:
        raise InvalidArgument("sigma_rho must be nonnegative")
    z_sites, _ = standing_wave_sites(n_sites, trap_wavelength_ratio, waist)
    rng = np.random.default_rng(seed)
    occupied = rng.random(n_sites) < fill_probability
    z = z_sites[occupied]
    xy = rng.normal(0.0, sigma_rho, size=(z.size, 2)) if sigma_rho > 0 else np.zeros((z.size, 2))
    positions = np.column_stack([xy[:, 0], xy[:, 1], z])
    if positions.shape[0] == 0:
        raise NumericalFailure(f"seed {seed} produced an empty array; re-seed or raise fill_probability")
    return AtomArray(positions=positions, transition=transition)


def plane_wave_drive(array: AtomArray, omega, khat, delta) -> DriveField:
    """Uniform plane wave: Omega^+_n = omega * exp(i k . R_n), Delta_n = delta."""
    khat = _as_unit_vector(khat, "khat")
    phases = array.positions @ (WAVENUMBER * khat)
    rabi = omega * np.exp(1j * phases)
    detuning = np.full(array.n_atoms, float(delta))
    return DriveField(rabi=rabi, detuning=detuning)


def eigenmode_drive(array: AtomArray, mode, omega) -> DriveField:
    """Drive with amplitudes taken from a collective mode: Omega^+_n = omega * u_n.

    The mode must satisfy sum_n |u_n|^2 = 1 to 1e-10.
    """
    mode = np.asarray(mode, dtype=complex)
    if mode.shape != (array.n_atoms,):
        raise InvalidArgument(f"mode must have length {array.n_atoms}")
    norm = np.sum(np.abs(mode) ** 2)
    if abs(norm - 1.0) > 1e-10:
        raise InvalidArgument(f"mode not normalized: sum |u|^2 = {norm:.12f}")
    return DriveField(rabi=omega * mode, detuning=np.zeros(array.n_atoms))
