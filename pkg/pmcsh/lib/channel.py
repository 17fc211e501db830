"""
Fiber channel library
Lumped linear SSMF model: chromatic dispersion with slope, first-order PMD, SOP rotation and drift,
attenuation and ASE loading at a given OSNR.
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy import constants
from scipy import stats

from .field import JonesOperator, apply_jones, fft_frequencies, total_power, waveplate

logger = logging.getLogger(__name__)

OSNR_REF_BANDWIDTH = 12.5e9


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class FiberParams:
    length: float = 20.0
    dispersion_D: float = 16.0
    # 0.08 ps/(nm^2.km) = 0.08e-12 s / (1e-18 m^2 * 1e3 m) = 80 s/m^3
    slope_S: float = 0.08
    atten: float = 0.2
    dgd_mean: float = None
    sop_drift_rate: float = 1.0
    ref_wavelength: float = 1550e-9

    def __post_init__(self):
        if not self.length >= 0:
            raise ValueError(f'Fiber length must not be negative, got {self.length}.')
        if not self.atten >= 0:
            raise ValueError(f'Attenuation must not be negative, got {self.atten}.')
        if self.dgd_mean is None:
            object.__setattr__(self, 'dgd_mean', 0.1 * np.sqrt(self.length))
        if not self.dgd_mean >= 0:
            raise ValueError(f'Mean DGD must not be negative, got {self.dgd_mean}.')
        if not self.sop_drift_rate >= 0:
            raise ValueError(f'SOP drift rate must not be negative, got {self.sop_drift_rate}.')
        if not self.ref_wavelength > 0:
            raise ValueError(f'Invalid reference wavelength: {self.ref_wavelength}.')

    @property
    def beta2(self):
        # s^2/m, D converted from ps/(nm.km) to s/m^2
        wavelength = self.ref_wavelength
        return -self.dispersion_D * 1e-6 * wavelength ** 2 / (2 * np.pi * constants.c)

    @property
    def beta3(self):
        # s^3/m, S converted from ps/(nm^2.km) to s/m^3
        wavelength = self.ref_wavelength
        dispersion = self.dispersion_D * 1e-6
        slope = self.slope_S * 1e3
        return (wavelength ** 2 / (2 * np.pi * constants.c)) ** 2 * (slope + 2 * dispersion / wavelength)

    @property
    def loss_factor(self):
        # field amplitude factor
        return 10 ** (-self.atten * self.length / 20)


@dataclass(frozen=True, eq=False)
class SopTrajectory:
    """
    Three rotation angles per control interval, angles[k] applies at t = k * dt.
    """
    angles: np.ndarray
    dt: float

    def __post_init__(self):
        angles = np.array(self.angles, dtype=float)
        if angles.ndim != 2 or angles.shape[1] != 3 or angles.shape[0] < 1:
            raise ChannelError(f'Invalid trajectory shape: {angles.shape}.')
        if not self.dt > 0:
            raise ChannelError(f'Invalid trajectory step: {self.dt}.')
        angles.setflags(write=False)
        object.__setattr__(self, 'angles', angles)

    @property
    def horizon(self):
        return (self.angles.shape[0] - 1) * self.dt

    @classmethod
    def random_walk(cls, rate, dt, n_steps, rng, stream='sop_drift'):
        increments = rng.stream(stream).normal(0.0, rate * dt, size=(n_steps, 3))
        angles = np.vstack((np.zeros((1, 3)), np.cumsum(increments, axis=0)))
        return cls(angles, dt)

    @classmethod
    def static(cls, dt, n_steps):
        return cls(np.zeros((n_steps + 1, 3)), dt)

    @classmethod
    def winding(cls, rate, dt, n_steps):
        # steady rotation about the 45 degree axis of the Poincare sphere
        angles = np.zeros((n_steps + 1, 3))
        angles[:, 1] = rate * dt * np.arange(n_steps + 1)
        return cls(angles, dt)


def rotation_from_angles(angles):
    # R_x(a1) R_45(a2) R_x(a3)
    alpha1, alpha2, alpha3 = angles
    return JonesOperator(waveplate(0.0, alpha1) @ waveplate(np.pi / 4, alpha2) @ waveplate(0.0, alpha3))


def random_unitary(rng, stream):
    # Haar-distributed element of U(2)
    return JonesOperator(stats.unitary_group.rvs(2, random_state=rng.stream(stream)))


def linear_rotation(angle):
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    return JonesOperator([[cos_a, -sin_a], [sin_a, cos_a]])


def draw_dgd(p, rng, stream='pmd_dgd'):
    if p.dgd_mean == 0:
        return 0.0
    # Maxwellian mean is 2 a sqrt(2 / pi)
    scale = p.dgd_mean / (2 * np.sqrt(2 / np.pi))
    return float(stats.maxwell.rvs(scale=scale, random_state=rng.stream(stream)))


def cd_transfer(f, p):
    omega = 2 * np.pi * np.asarray(f, dtype=float)
    length = p.length * 1e3
    return np.exp(1j * (p.beta2 / 2) * omega ** 2 * length + 1j * (p.beta3 / 6) * omega ** 3 * length)


def pmd_transfer(f, dgd_ps, axes=None):
    f = np.asarray(f, dtype=float)
    phase = np.pi * f * dgd_ps * 1e-12
    diag = np.zeros(f.shape + (2, 2), dtype=np.complex128)
    diag[..., 0, 0] = np.exp(1j * phase)
    diag[..., 1, 1] = np.exp(-1j * phase)
    operator = JonesOperator(diag)
    if axes is not None:
        operator = JonesOperator(axes.matrix @ diag @ axes.dagger.matrix)
    return operator


def propagate(sig, p, static_rotation, dgd_sample=0.0, pmd_axes=None):
    """
    Applies in order: dispersion, first-order PMD with principal axes `pmd_axes`, the static SOP
    rotation and the span loss. Every element is linear so they are lumped in one per-bin operator.
    """
    if static_rotation.frequency_dependent or not static_rotation.is_unitary(1e-9):
        raise ChannelError('The static SOP rotation must be a frequency-flat unitary operator.')
    if pmd_axes is not None and not pmd_axes.is_unitary(1e-9):
        raise ChannelError('The PMD principal axes must be a unitary operator.')
    freqs = fft_frequencies(sig)
    dispersion = cd_transfer(freqs, p)
    pmd = pmd_transfer(freqs, dgd_sample, pmd_axes)
    matrix = p.loss_factor * static_rotation.matrix @ pmd.matrix * dispersion[:, None, None]
    logger.debug(f'Propagating {p.length:g} km, DGD {dgd_sample:.3f} ps.')
    return apply_jones(sig, JonesOperator(matrix))


def load_osnr(sig, osnr_db, rng, stream='ase'):
    """
    Adds ASE so that total signal power / (N0 * 12.5 GHz) matches the OSNR, N0 being summed over
    both polarizations.
    """
    if np.isinf(osnr_db) and osnr_db > 0:
        return sig
    power = total_power(sig)
    if not power > 0:
        raise ChannelError('Cannot load OSNR on a signal without power.')
    density = power / (10 ** (osnr_db / 10) * OSNR_REF_BANDWIDTH)
    sigma = np.sqrt(density / 2 * sig.sample_rate / 2)
    gen = rng.stream(stream)
    noise = gen.normal(0.0, sigma, size=(4, len(sig)))
    return sig.replace(sig.samples_x + noise[0] + 1j * noise[1], sig.samples_y + noise[2] + 1j * noise[3])


def drift_step(traj, t):
    if t < 0 or t > traj.horizon * (1 + 1e-12):
        raise ChannelError(f'Time {t} s is outside the trajectory horizon [0, {traj.horizon}] s.')
    grid = np.arange(traj.angles.shape[0]) * traj.dt
    angles = [np.interp(t, grid, traj.angles[:, axis]) for axis in range(3)]
    return rotation_from_angles(angles)
