"""
Dual-polarization field library
Signal representation, Jones operators, spectra and seeded random streams shared by every stage.

Conventions: amplitudes are in sqrt(mW) so that |a|^2 is a power in mW, the forward FFT uses the
exp(-j 2 pi f t) kernel unnormalized and the inverse carries the 1/N factor (scipy.fft defaults).
"""
from dataclasses import dataclass
from fractions import Fraction
import hashlib
import logging

import numpy as np
from scipy import fft as sp_fft
from scipy import signal as sp_signal

logger = logging.getLogger(__name__)

MAX_RESAMPLE_DENOMINATOR = 64
# Resampling keeps content below this fraction of the lower rate flat
RESAMPLE_PASSBAND = 0.45
RESAMPLE_STOPBAND_DB = 60.0


class SignalError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DualPolSignal:
    samples_x: np.ndarray
    samples_y: np.ndarray
    sample_rate: float
    center_wavelength: float = 1550e-9

    def __post_init__(self):
        samples_x = np.array(self.samples_x, dtype=np.complex128).reshape(-1)
        samples_y = np.array(self.samples_y, dtype=np.complex128).reshape(-1)
        if samples_x.size < 1:
            raise SignalError('empty signal')
        if samples_x.size != samples_y.size:
            raise SignalError(
                f'Polarization lengths differ: {samples_x.size} != {samples_y.size}.')
        if not self.sample_rate > 0:
            raise SignalError(f'Invalid sample rate: {self.sample_rate}.')
        if not self.center_wavelength > 0:
            raise SignalError(f'Invalid center wavelength: {self.center_wavelength}.')
        samples_x.setflags(write=False)
        samples_y.setflags(write=False)
        object.__setattr__(self, 'samples_x', samples_x)
        object.__setattr__(self, 'samples_y', samples_y)

    def __len__(self):
        return self.samples_x.size

    @property
    def jones(self):
        # (2, n) view, x on row 0
        return np.stack((self.samples_x, self.samples_y))

    def replace(self, samples_x, samples_y):
        return DualPolSignal(samples_x, samples_y, self.sample_rate, self.center_wavelength)


@dataclass(frozen=True, eq=False)
class JonesOperator:
    """
    2x2 complex operator, either frequency-flat (matrix of shape (2, 2)) or tabulated per FFT bin
    (shape (n, 2, 2), bins in numpy FFT order).
    """
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.shape[-2:] != (2, 2) or matrix.ndim not in (2, 3):
            raise SignalError(f'Invalid Jones operator shape: {matrix.shape}.')
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def identity(cls):
        return cls(np.eye(2))

    @classmethod
    def from_elements(cls, m00, m01, m10, m11):
        m00, m01, m10, m11 = np.broadcast_arrays(*(np.asarray(m, dtype=np.complex128) for m in (m00, m01, m10, m11)))
        matrix = np.stack((np.stack((m00, m01), axis=-1), np.stack((m10, m11), axis=-1)), axis=-2)
        return cls(matrix)

    @property
    def m00(self):
        return self.matrix[..., 0, 0]

    @property
    def m01(self):
        return self.matrix[..., 0, 1]

    @property
    def m10(self):
        return self.matrix[..., 1, 0]

    @property
    def m11(self):
        return self.matrix[..., 1, 1]

    @property
    def frequency_dependent(self):
        return self.matrix.ndim == 3

    @property
    def dagger(self):
        return JonesOperator(np.conj(np.swapaxes(self.matrix, -1, -2)))

    def __matmul__(self, other):
        # self applied after other
        return JonesOperator(self.matrix @ other.matrix)

    def unitarity_residual(self):
        product = np.conj(np.swapaxes(self.matrix, -1, -2)) @ self.matrix
        return float(np.max(np.abs(product - np.eye(2))))

    def is_unitary(self, tol=1e-12):
        return self.unitarity_residual() <= tol


@dataclass(frozen=True)
class Rng:
    """
    Counter-based random source with named independent streams.
    Each stream is a Philox generator keyed by (seed, point, hash of the name), so adding a stream
    never shifts the draws of the others. `point` separates the runs of a sweep.
    """
    seed: int = 0
    point: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise SignalError(f'Seed must be a 64-bit unsigned integer, got {self.seed}.')
        if self.point < 0:
            raise SignalError(f'Invalid stream point: {self.point}.')

    def stream(self, name):
        name_key = int.from_bytes(hashlib.sha256(name.encode('utf-8')).digest()[:8], 'big')
        seed_seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.point, name_key))
        return np.random.Generator(np.random.Philox(seed_seq))

    def derive(self, point):
        return Rng(self.seed, point)


def fft_frequencies(sig):
    return sp_fft.fftfreq(len(sig), d=1.0 / sig.sample_rate)


def total_power(sig):
    if sig is None or len(sig) == 0:
        raise SignalError('empty signal')
    return float(np.mean(np.abs(sig.samples_x) ** 2 + np.abs(sig.samples_y) ** 2))


def coherency(sig):
    # Time-averaged <E E^H>, its trace is total_power(sig)
    jones = sig.jones
    return jones @ np.conj(jones.T) / len(sig)


def stokes_from_coherency(matrix):
    s0 = np.real(matrix[0, 0] + matrix[1, 1])
    s1 = np.real(matrix[0, 0] - matrix[1, 1])
    s2 = 2 * np.real(matrix[0, 1])
    s3 = -2 * np.imag(matrix[0, 1])
    return np.array([s0, s1, s2, s3])


def waveplate(axis, retardance):
    """
    Linear retarder R(axis) diag(exp(j phi/2), exp(-j phi/2)) R(-axis), vectorized over `retardance`.
    Returns an array of shape retardance.shape + (2, 2).
    """
    retardance = np.asarray(retardance, dtype=float)
    cos_a, sin_a = np.cos(axis), np.sin(axis)
    plus = np.exp(0.5j * retardance)
    minus = np.conj(plus)
    out = np.empty(retardance.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = cos_a ** 2 * plus + sin_a ** 2 * minus
    out[..., 0, 1] = cos_a * sin_a * (plus - minus)
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = sin_a ** 2 * plus + cos_a ** 2 * minus
    return out


def apply_jones(sig, operator):
    if not operator.frequency_dependent:
        out = operator.matrix @ sig.jones
        return sig.replace(out[0], out[1])

    n = len(sig)
    if operator.matrix.shape[0] != n:
        raise SignalError(
            f'Operator tabulated on {operator.matrix.shape[0]} bins, signal has {n} samples.')
    spectrum = sp_fft.fft(sig.jones, axis=1)
    spectrum = np.einsum('kij,jk->ik', operator.matrix, spectrum)
    out = sp_fft.ifft(spectrum, axis=1)
    return sig.replace(out[0], out[1])


def psd(sig, segment_len=4096, which='x'):
    """
    Welch periodogram (Hann window, 50% overlap, two-sided) of one polarization.
    Returns (frequencies in Hz, density in mW/Hz) sorted by frequency.
    """
    if segment_len < 2 or segment_len & (segment_len - 1):
        raise SignalError(f'Segment length must be a power of two, got {segment_len}.')
    if segment_len > len(sig):
        raise SignalError(f'Segment length {segment_len} is longer than the signal ({len(sig)} samples).')
    if which not in ('x', 'y'):
        raise SignalError(f'Invalid polarization "{which}".')
    samples = sig.samples_x if which == 'x' else sig.samples_y
    freqs, density = sp_signal.welch(
        samples,
        fs=sig.sample_rate,
        window='hann',
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend=False,
        return_onesided=False,
        scaling='density',
    )
    return sp_fft.fftshift(freqs), sp_fft.fftshift(density)


def rational_ratio(old_rate, new_rate):
    if not new_rate > 0 or not old_rate > 0:
        raise SignalError(f'Invalid sample rates: {old_rate} -> {new_rate}.')
    ratio = Fraction(new_rate / old_rate).limit_denominator(MAX_RESAMPLE_DENOMINATOR)
    if ratio == 0 or abs(float(ratio) * old_rate - new_rate) > 1e-9 * new_rate:
        raise SignalError(
            f'Rate ratio {new_rate / old_rate} is not rational with a denominator <= {MAX_RESAMPLE_DENOMINATOR}.')
    return ratio.numerator, ratio.denominator


def resample_taps(up, down):
    """
    Kaiser low-pass for `resample_poly`, flat up to RESAMPLE_PASSBAND of the lower rate and rejecting
    everything that would alias into that band. Unity DC gain, odd length.
    """
    max_rate = max(up, down)
    # edges relative to the Nyquist frequency of the upsampled stream
    width = 2 * (1 - 2 * RESAMPLE_PASSBAND) / max_rate
    numtaps, beta = sp_signal.kaiserord(RESAMPLE_STOPBAND_DB, width)
    return sp_signal.firwin(numtaps | 1, 1 / max_rate, window=('kaiser', beta))


def resample(sig, new_rate):
    if new_rate == sig.sample_rate:
        return sig
    up, down = rational_ratio(sig.sample_rate, new_rate)
    logger.debug(f'Resampling by {up}/{down}.')
    taps = resample_taps(up, down)
    samples_x = sp_signal.resample_poly(sig.samples_x, up, down, window=taps)
    samples_y = sp_signal.resample_poly(sig.samples_y, up, down, window=taps)
    return DualPolSignal(samples_x, samples_y, sig.sample_rate * up / down, sig.center_wavelength)
