"""
Transmitter library
Laser, PRBS payload, Gray mapping, RRC shaping, IQ modulator and the polarization beam combiner.
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy import signal as sp_signal

from .field import DualPolSignal, Rng, SignalError

logger = logging.getLogger(__name__)

# Primitive trinomials x^m + x^k + 1 as (m, k)
PRBS_POLYNOMIALS = {
    15: (15, 14),
    23: (23, 18),
}

BITS_PER_SYMBOL = {
    'QPSK': 2,
    'QAM16': 4,
}

# Fixed seed of the known preamble, shared by transmitter and receiver
PREAMBLE_SEED = 0x504D4353
DEFAULT_PAYLOAD_SYMBOLS = 16384

# Gray code per axis, index is the 2-bit value b0 * 2 + b1
QAM16_LEVELS = np.array([3.0, 1.0, -3.0, -1.0])


@dataclass(frozen=True)
class LaserParams:
    power: float = 10.0
    linewidth: float = 100e3
    launch_azimuth: float = 45.0
    wavelength: float = 1550e-9

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError(f'Laser power must be positive, got {self.power}.')
        if not self.linewidth >= 0:
            raise ValueError(f'Laser linewidth must not be negative, got {self.linewidth}.')
        if not self.wavelength > 0:
            raise ValueError(f'Invalid laser wavelength: {self.wavelength}.')


@dataclass(frozen=True)
class ModulatorParams:
    insertion_loss: float = 12.0
    v_pi: float = 3.5
    drive_vpp: float = 0.35
    transfer: str = 'ideal_linear'

    def __post_init__(self):
        if not self.insertion_loss >= 0:
            raise ValueError(f'Insertion loss must not be negative, got {self.insertion_loss}.')
        if not self.v_pi > 0:
            raise ValueError(f'V_pi must be positive, got {self.v_pi}.')
        if not self.drive_vpp > 0:
            raise ValueError(f'Drive amplitude must be positive, got {self.drive_vpp}.')
        if self.transfer not in ('ideal_linear', 'mzm_sine'):
            raise ValueError(f'Invalid modulator transfer "{self.transfer}".')


@dataclass(frozen=True)
class TxConfig:
    format: str = 'QPSK'
    baud: float = 50e9
    rolloff: float = 0.1
    samples_per_symbol: int = 16
    prbs_order: int = 15
    preamble_len: int = 256
    filter_span: int = 128

    def __post_init__(self):
        if self.format not in BITS_PER_SYMBOL:
            raise ValueError(f'Invalid modulation format "{self.format}".')
        if not self.baud > 0:
            raise ValueError(f'Baud rate must be positive, got {self.baud}.')
        if not 0 < self.rolloff <= 1:
            raise ValueError(f'Rolloff must be in (0, 1], got {self.rolloff}.')
        if self.samples_per_symbol < 4 or self.samples_per_symbol % 2:
            raise ValueError(f'Samples per symbol must be even and >= 4, got {self.samples_per_symbol}.')
        if self.prbs_order not in PRBS_POLYNOMIALS:
            raise ValueError(f'PRBS order must be one of {sorted(PRBS_POLYNOMIALS)}, got {self.prbs_order}.')
        if self.preamble_len < 0:
            raise ValueError(f'Invalid preamble length: {self.preamble_len}.')
        if self.filter_span < 2 or self.filter_span % 2:
            raise ValueError(f'Filter span must be an even number of symbols, got {self.filter_span}.')

    @property
    def sample_rate(self):
        return self.baud * self.samples_per_symbol

    @property
    def bits_per_symbol(self):
        return BITS_PER_SYMBOL[self.format]


@dataclass(frozen=True, eq=False)
class TxFrame:
    bits: np.ndarray
    preamble: np.ndarray
    payload: np.ndarray

    @property
    def symbols(self):
        return np.concatenate((self.preamble, self.payload))


def gen_bits(rng, count, order=15, stream='prbs'):
    if count <= 0:
        raise ValueError(f'Bit count must be positive, got {count}.')
    if order not in PRBS_POLYNOMIALS:
        raise ValueError(f'Unsupported PRBS order {order}.')
    gen = rng.stream(stream)
    state = np.zeros(order, dtype=np.uint8)
    while not state.any():
        state = gen.integers(0, 2, size=order, dtype=np.uint8)
    # s[n + m] = s[n + k] ^ s[n], the first m bits are the seed state
    _, k = PRBS_POLYNOMIALS[order]
    bits, _ = sp_signal.max_len_seq(order, state=state, length=count, taps=[k])
    return bits.astype(np.uint8)


def map_symbols(bits, fmt):
    bits = np.asarray(bits, dtype=np.uint8)
    bps = BITS_PER_SYMBOL.get(fmt)
    if bps is None:
        raise ValueError(f'Invalid modulation format "{fmt}".')
    if bits.size % bps:
        raise ValueError(f'{bits.size} bits cannot be mapped to {fmt} ({bps} bits per symbol).')
    groups = bits.reshape(-1, bps).astype(np.int64)
    if fmt == 'QPSK':
        return ((1 - 2 * groups[:, 0]) + 1j * (1 - 2 * groups[:, 1])) / np.sqrt(2)
    i_levels = QAM16_LEVELS[groups[:, 0] * 2 + groups[:, 1]]
    q_levels = QAM16_LEVELS[groups[:, 2] * 2 + groups[:, 3]]
    return (i_levels + 1j * q_levels) / np.sqrt(10)


def constellation(fmt):
    bps = BITS_PER_SYMBOL[fmt]
    labels = (np.arange(2 ** bps)[:, None] >> np.arange(bps - 1, -1, -1)) & 1
    return map_symbols(labels.reshape(-1), fmt), labels


def preamble_symbols(length):
    # Not drawn from the payload PRBS, so it never reappears inside the payload
    bits = Rng(PREAMBLE_SEED).stream('preamble').integers(0, 2, size=2 * length, dtype=np.uint8)
    return map_symbols(bits, 'QPSK')


def rrc_taps(rolloff, span, sps):
    """
    Root-raised-cosine taps over `span` symbols, normalized to unit energy per symbol period
    (sum of squares equals sps).
    """
    delay = span * sps // 2
    t = np.arange(-delay, delay + 1) / sps
    taps = np.zeros(t.size)
    beta = rolloff

    center = np.isclose(t, 0.0)
    taps[center] = 1 - beta + 4 * beta / np.pi

    edge = np.abs(np.abs(4 * beta * t) - 1) < np.sqrt(np.finfo(float).eps)
    taps[edge] = beta / np.sqrt(2) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )

    rest = ~(center | edge)
    tr = t[rest]
    taps[rest] = (
        np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    ) / (np.pi * tr * (1 - (4 * beta * tr) ** 2))

    return taps * np.sqrt(sps / np.sum(taps ** 2))


def rrc_shape(symbols, cfg):
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size == 0:
        raise ValueError('Cannot shape an empty symbol sequence.')
    sps = cfg.samples_per_symbol
    taps = rrc_taps(cfg.rolloff, cfg.filter_span, sps)
    delay = (taps.size - 1) // 2
    shaped = sp_signal.upfirdn(taps, symbols, up=sps)
    return shaped[delay:delay + symbols.size * sps]


def laser_field(params, n, rate, rng, stream='laser_phase'):
    if n <= 0:
        raise ValueError(f'Sample count must be positive, got {n}.')
    if params.linewidth > 0:
        increments = rng.stream(stream).normal(0.0, np.sqrt(2 * np.pi * params.linewidth / rate), n)
        increments[0] = 0.0
        phase = np.cumsum(increments)
    else:
        phase = np.zeros(n)
    carrier = np.sqrt(params.power) * np.exp(1j * phase)
    azimuth = np.deg2rad(params.launch_azimuth)
    return DualPolSignal(carrier * np.cos(azimuth), carrier * np.sin(azimuth), rate, params.wavelength)


def iq_modulate(carrier, waveform, params):
    carrier = np.asarray(carrier, dtype=np.complex128)
    waveform = np.asarray(waveform, dtype=np.complex128)
    if carrier.shape != waveform.shape:
        raise SignalError(f'Carrier and drive lengths differ: {carrier.size} != {waveform.size}.')
    loss = 10 ** (-params.insertion_loss / 20)
    if params.transfer == 'ideal_linear':
        return carrier * waveform * loss

    peak = max(np.max(np.abs(waveform.real)), np.max(np.abs(waveform.imag)))
    if peak == 0:
        return np.zeros_like(carrier)
    scale = params.drive_vpp / (2 * peak)
    v_i = waveform.real * scale
    v_q = waveform.imag * scale
    field = (np.sin(np.pi * v_i / (2 * params.v_pi)) + 1j * np.sin(np.pi * v_q / (2 * params.v_pi))) / np.sqrt(2)
    return carrier * loss * field


def make_frame(cfg, n_symbols, rng):
    if n_symbols <= 0:
        raise ValueError(f'Payload length must be positive, got {n_symbols}.')
    bits = gen_bits(rng, n_symbols * cfg.bits_per_symbol, order=cfg.prbs_order)
    return TxFrame(
        bits=bits,
        preamble=preamble_symbols(cfg.preamble_len),
        payload=map_symbols(bits, cfg.format),
    )


def build_tx(cfg, laser, mod, rng, n_symbols=DEFAULT_PAYLOAD_SYMBOLS):
    """
    Polarization-multiplexed carrier transmitter: modulated branch on x, unmodulated carrier on y.
    The frame comes from the named streams of `rng`, so `make_frame(cfg, n_symbols, rng)` gives back
    the transmitted bits.
    """
    frame = make_frame(cfg, n_symbols, rng)
    waveform = rrc_shape(frame.symbols, cfg)
    light = laser_field(laser, waveform.size, cfg.sample_rate, rng)
    signal = iq_modulate(light.samples_x, waveform, mod)
    logger.debug(
        f'Transmitter built: {frame.symbols.size} symbols, {waveform.size} samples at {cfg.sample_rate / 1e9:g} GS/s.')
    return light.replace(signal, light.samples_y)
