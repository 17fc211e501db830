"""
Receiver front-end library
Endless polarization controller, PBS, monitor tap and photodetector, 90 degree hybrid with balanced
photodetectors.

Photocurrents are in mA: a responsivity in A/W times a power in mW.
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy import constants
from scipy import signal as sp_signal

from .field import JonesOperator, SignalError, waveplate

logger = logging.getLogger(__name__)

# Waveplate axes of the default 4-plate controller
EPC_AXES = (0.0, np.pi / 4, 0.0, np.pi / 4)


@dataclass(frozen=True, eq=False)
class EpcState:
    retardances: np.ndarray
    axes: tuple = EPC_AXES
    volts_per_rad: float = 1.0

    def __post_init__(self):
        retardances = np.array(self.retardances, dtype=float).reshape(-1)
        axes = tuple(float(axis) for axis in self.axes)
        if retardances.size != len(axes) or not axes:
            raise ValueError(f'{retardances.size} retardances given for {len(axes)} waveplates.')
        if not np.all(np.isfinite(retardances)):
            raise ValueError('Retardances must be finite.')
        retardances.setflags(write=False)
        object.__setattr__(self, 'retardances', retardances)
        object.__setattr__(self, 'axes', axes)

    @classmethod
    def zeros(cls, axes=EPC_AXES, volts_per_rad=1.0):
        return cls(np.zeros(len(axes)), axes, volts_per_rad)

    @property
    def n_plates(self):
        return len(self.axes)

    @property
    def voltages(self):
        return self.retardances * self.volts_per_rad

    def with_retardances(self, retardances):
        return EpcState(retardances, self.axes, self.volts_per_rad)


@dataclass(frozen=True)
class ReceiverParams:
    tap_ratio: float = 0.10
    responsivity: float = 0.8
    # A/sqrt(Hz)
    thermal_noise_std: float = 15e-12
    shot_noise: bool = True
    monitor_bw: float = 100e3
    # 0 for ideal electronics
    pd_bw: float = 0.0

    def __post_init__(self):
        if not 0 < self.tap_ratio < 1:
            raise ValueError(f'Tap ratio must be in (0, 1), got {self.tap_ratio}.')
        if not self.responsivity > 0:
            raise ValueError(f'Responsivity must be positive, got {self.responsivity}.')
        if not self.thermal_noise_std >= 0:
            raise ValueError(f'Thermal noise must not be negative, got {self.thermal_noise_std}.')
        if not self.monitor_bw > 0:
            raise ValueError(f'Monitor bandwidth must be positive, got {self.monitor_bw}.')
        if not self.pd_bw >= 0:
            raise ValueError(f'Photodetector bandwidth must not be negative, got {self.pd_bw}.')

    @property
    def monitor_noise_std(self):
        # Thermal noise referred to optical power, in mW
        return self.thermal_noise_std * np.sqrt(self.monitor_bw) / self.responsivity * 1e3


@dataclass(frozen=True, eq=False)
class IqWaveforms:
    i: np.ndarray
    q: np.ndarray
    rate: float

    def __post_init__(self):
        i = np.array(self.i, dtype=float).reshape(-1)
        q = np.array(self.q, dtype=float).reshape(-1)
        if i.size != q.size:
            raise SignalError(f'I and Q lengths differ: {i.size} != {q.size}.')
        if not self.rate > 0:
            raise SignalError(f'Invalid sample rate: {self.rate}.')
        object.__setattr__(self, 'i', i)
        object.__setattr__(self, 'q', q)

    def __len__(self):
        return self.i.size

    @property
    def complex(self):
        return self.i + 1j * self.q


def plate_jones(axis, retardance):
    # Retardances are accumulators, the plate only sees them modulo 2 pi
    return waveplate(axis, np.mod(retardance, 2 * np.pi))


def epc_jones(state):
    matrix = np.eye(2, dtype=np.complex128)
    for axis, retardance in zip(state.axes, state.retardances):
        matrix = plate_jones(axis, retardance) @ matrix
    return JonesOperator(matrix)


def pbs_split(sig):
    """
    Returns (branch_a, branch_b): the x component feeds the signal port, the y component the LO port.
    """
    return sig.samples_x, sig.samples_y


def tap(branch, ratio):
    if not 0 < ratio < 1:
        raise ValueError(f'Tap ratio must be in (0, 1), got {ratio}.')
    branch = np.asarray(branch, dtype=np.complex128)
    return branch * np.sqrt(1 - ratio), branch * np.sqrt(ratio)


def monitor_pd(monitor, p, gen=None, n_avg=1, clamp=True):
    """
    Reading of the low bandwidth monitor photodetector over one control interval, in mW.
    `gen` draws the thermal noise, averaged over `n_avg` samples; no generator means noiseless.
    """
    reading = float(np.mean(np.abs(np.asarray(monitor)) ** 2))
    return _add_monitor_noise(reading, p, gen, n_avg, clamp)


def _add_monitor_noise(reading, p, gen, n_avg, clamp):
    if gen is not None and p.thermal_noise_std > 0:
        reading += gen.normal(0.0, p.monitor_noise_std / np.sqrt(n_avg))
    if clamp:
        reading = max(reading, 0.0)
    return reading


class MonitorPhotodiode():
    """
    Monitor photodetector with memory: between two readings separated by `interval` seconds, the
    output settles towards the new optical power through a single pole at the monitor bandwidth.
    """

    def __init__(self, params, gen=None, n_avg=1, interval=None):
        if n_avg < 1:
            raise ValueError(f'Invalid averaging count: {n_avg}.')
        self.params = params
        self.gen = gen
        self.n_avg = n_avg
        if interval is None:
            self.alpha = 1.0
        else:
            self.alpha = 1 - np.exp(-2 * np.pi * params.monitor_bw * interval)
        self.level = None

    def read(self, power):
        if self.level is None:
            self.level = power
        else:
            self.level += self.alpha * (power - self.level)
        return _add_monitor_noise(self.level, self.params, self.gen, self.n_avg, clamp=True)

    def measure(self, monitor):
        return self.read(float(np.mean(np.abs(np.asarray(monitor)) ** 2)))


def _single_pole(samples, bandwidth, rate):
    alpha = 1 - np.exp(-2 * np.pi * bandwidth / rate)
    return sp_signal.lfilter([alpha], [1, alpha - 1], samples)


def hybrid_bpd(signal, carrier, rate, p, rng=None):
    """
    Ideal 90 degree hybrid and balanced detection of `signal` against `carrier`.
    Noise is drawn from the `bpd_shot` and `bpd_thermal` streams of `rng` (noiseless without rng).
    """
    signal = np.asarray(signal, dtype=np.complex128)
    carrier = np.asarray(carrier, dtype=np.complex128)
    if signal.shape != carrier.shape:
        raise SignalError(f'Signal and carrier lengths differ: {signal.size} != {carrier.size}.')
    beat = p.responsivity * signal * np.conj(carrier)
    i, q = beat.real, beat.imag

    if rng is not None:
        bandwidth = rate / 2
        if p.shot_noise:
            # mA^2, the shot current of each balanced output sees half of the total power
            power = (np.mean(np.abs(signal) ** 2) + np.mean(np.abs(carrier) ** 2)) * 1e-3
            sigma = np.sqrt(2 * constants.e * p.responsivity * power / 2 * bandwidth) * 1e3
            noise = rng.stream('bpd_shot').normal(0.0, sigma, size=(2, signal.size))
            i, q = i + noise[0], q + noise[1]
        if p.thermal_noise_std > 0:
            sigma = p.thermal_noise_std * np.sqrt(bandwidth) * 1e3
            noise = rng.stream('bpd_thermal').normal(0.0, sigma, size=(2, signal.size))
            i, q = i + noise[0], q + noise[1]

    if p.pd_bw > 0:
        i = _single_pole(i, p.pd_bw, rate)
        q = _single_pole(q, p.pd_bw, rate)
    return IqWaveforms(i, q, rate)
