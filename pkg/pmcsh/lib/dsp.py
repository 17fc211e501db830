"""
Receive DSP library
Matched filter and preamble synchronization, static phase alignment, RDE and DFE equalizers,
demapping and BER/EVM metrology, spectral summaries.
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy import fft as sp_fft
from scipy import signal as sp_signal
from scipy import special
from scipy import stats

from .field import psd, rational_ratio, resample_taps
from .txchain import BITS_PER_SYMBOL, QAM16_LEVELS, constellation, map_symbols, rrc_taps

logger = logging.getLogger(__name__)

# Ring radii^2 of the unit power constellations
RDE_RADII = {
    'QPSK': (1.0,),
    'QAM16': (0.2, 1.0, 1.8),
}

SYNC_THRESHOLD = 3.0
# Percentile of the correlation magnitudes taken as the background level
SYNC_BACKGROUND_PERCENTILE = 99.0
DIVERGENCE_NORM = 1e3
LINE_HALF_WIDTH = 2
FLOOR_BINS = 8


class SyncError(ValueError):
    pass


class EqualizerError(ValueError):
    pass


@dataclass(frozen=True)
class EqualizerConfig:
    ff_taps: int = 15
    fb_taps: int = 5
    mu_rde: float = 1e-3
    mu_dfe: float = 1e-3
    train_len: int = 1000

    def __post_init__(self):
        if self.ff_taps < 1 or self.ff_taps % 2 == 0:
            raise ValueError(f'Feedforward taps must be odd and >= 1, got {self.ff_taps}.')
        if self.fb_taps < 0:
            raise ValueError(f'Invalid feedback tap count: {self.fb_taps}.')
        if not self.mu_rde > 0 or not self.mu_dfe > 0:
            raise ValueError(f'Equalizer steps must be positive, got {self.mu_rde} and {self.mu_dfe}.')
        if self.train_len < 0:
            raise ValueError(f'Invalid training length: {self.train_len}.')

    def rde_radii(self, fmt):
        return RDE_RADII[fmt]


@dataclass(frozen=True)
class Metrics:
    ber: float
    evm_db: float
    snr_est_db: float
    counted_bits: int
    error_bits: int

    def as_dict(self):
        return {
            'ber': self.ber,
            'evm_db': self.evm_db,
            'snr_est_db': self.snr_est_db,
            'counted_bits': self.counted_bits,
            'error_bits': self.error_bits,
        }


@dataclass(frozen=True, eq=False)
class EqualizerResult:
    y_hat: np.ndarray
    decisions: np.ndarray
    weights: np.ndarray
    error: np.ndarray
    feedback: np.ndarray = None
    num_train_symbols: int = 0


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    freqs: np.ndarray
    psd_x: np.ndarray
    psd_y: np.ndarray
    line_power_x: float
    line_power_y: float
    wideband_power_x: float
    wideband_power_y: float

    @property
    def line_to_wideband_x(self):
        return _ratio_db(self.line_power_x, self.wideband_power_x)

    @property
    def line_to_wideband_y(self):
        return _ratio_db(self.line_power_y, self.wideband_power_y)

    def summary(self):
        return {
            'line_power_x_mw': self.line_power_x,
            'line_power_y_mw': self.line_power_y,
            'wideband_power_x_mw': self.wideband_power_x,
            'wideband_power_y_mw': self.wideband_power_y,
            'line_to_wideband_x_db': self.line_to_wideband_x,
            'line_to_wideband_y_db': self.line_to_wideband_y,
        }


def _ratio_db(num, den):
    if num <= 0:
        return float('-inf')
    if den <= 0:
        return float('inf')
    return float(10 * np.log10(num / den))


def q_function(x):
    return 0.5 * special.erfc(np.asarray(x) / np.sqrt(2))


def _circular_correlation(samples, reference):
    # c[lag] = sum_k samples[lag + k] conj(reference[k])
    n = samples.size
    return sp_fft.ifft(sp_fft.fft(samples, n) * np.conj(sp_fft.fft(reference, n)))


def matched_filter_downsample(iq, cfg, preamble):
    """
    RRC matched filter then decimation at the timing phase and symbol lag maximizing the preamble
    correlation. The output starts with the preamble and has unit mean power.
    """
    preamble = np.asarray(preamble, dtype=np.complex128)
    if preamble.size == 0:
        raise SyncError('sync failed: no preamble configured')
    sps = cfg.samples_per_symbol
    samples = iq.complex
    if iq.rate != cfg.sample_rate:
        up, down = rational_ratio(iq.rate, cfg.sample_rate)
        samples = sp_signal.resample_poly(samples, up, down, window=resample_taps(up, down))
    # AC-coupled detectors
    samples = samples - np.mean(samples)
    taps = rrc_taps(cfg.rolloff, cfg.filter_span, sps) / sps
    filtered = sp_signal.fftconvolve(samples, taps, mode='same')

    n_symbols = filtered.size // sps
    if n_symbols < preamble.size:
        raise SyncError(f'sync failed: {n_symbols} symbols received for a {preamble.size} symbol preamble')
    best = None
    magnitudes = []
    for phase in range(sps):
        symbols = filtered[phase::sps][:n_symbols]
        for conjugate in (False, True):
            corr = np.abs(_circular_correlation(np.conj(symbols) if conjugate else symbols, preamble))
            magnitudes.append(corr)
            lag = int(np.argmax(corr))
            if best is None or corr[lag] > best[0]:
                best = (corr[lag], phase, lag, conjugate)
    peak, phase, lag, conjugate = best
    background = np.percentile(np.concatenate(magnitudes), SYNC_BACKGROUND_PERCENTILE)
    if not peak > SYNC_THRESHOLD * background:
        raise SyncError(
            f'sync failed: correlation peak {peak:.3g} below {SYNC_THRESHOLD} x background {background:.3g}')
    logger.debug(f'Preamble found at symbol {lag}, timing phase {phase}/{sps}, conjugated: {conjugate}.')

    symbols = np.roll(filtered[phase::sps][:n_symbols], -lag)
    return symbols / np.sqrt(np.mean(np.abs(symbols) ** 2))


def phase_align(symbols, preamble):
    """
    One static rotation, with the conjugation ambiguity, estimated by least squares on the preamble
    found at the start of `symbols`.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    preamble = np.asarray(preamble, dtype=np.complex128)
    if preamble.size == 0 or symbols.size < preamble.size:
        raise SyncError('Cannot align the phase without a preamble.')
    received = symbols[:preamble.size]
    direct = np.sum(preamble * np.conj(received))
    conjugated = np.sum(preamble * received)
    if np.abs(conjugated) > np.abs(direct):
        return np.conj(symbols) * np.exp(1j * np.angle(conjugated))
    return symbols * np.exp(1j * np.angle(direct))


def _check_taps(weights):
    norm = np.linalg.norm(weights)
    if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
        raise EqualizerError('equalizer diverged')


def _padded(symbols, n_taps):
    half = n_taps // 2
    return np.concatenate((np.zeros(half, dtype=np.complex128), symbols, np.zeros(half, dtype=np.complex128)))


def slicer(values, fmt):
    points, _ = constellation(fmt)
    values = np.asarray(values)
    return points[np.argmin(np.abs(values[..., None] - points), axis=-1)]


def rde_equalize(symbols, cfg, fmt='QPSK', sps=1):
    """
    Radius-directed equalizer: y = w^T u, e = R^2 - |y|^2 with R the nearest ring,
    w <- w + mu e y conj(u). `sps` input samples per output symbol.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size <= cfg.ff_taps + cfg.train_len:
        raise EqualizerError(
            f'{symbols.size} symbols are not enough for {cfg.ff_taps} taps and {cfg.train_len} training symbols.')
    radii = np.array(cfg.rde_radii(fmt))
    n_taps = cfg.ff_taps
    padded = _padded(symbols, n_taps)
    weights = np.zeros(n_taps, dtype=np.complex128)
    weights[n_taps // 2] = 1.0
    n_out = symbols.size // sps
    y_hat = np.empty(n_out, dtype=np.complex128)
    error = np.empty(n_out)
    for index in range(n_out):
        window = padded[index * sps:index * sps + n_taps]
        y = weights @ window
        power = (y * np.conj(y)).real
        err = radii[np.argmin(np.abs(radii - power))] - power
        weights += cfg.mu_rde * err * y * np.conj(window)
        _check_taps(weights)
        y_hat[index] = y
        error[index] = err
    logger.debug(f'RDE done, tap norm {np.linalg.norm(weights):.3f}.')
    return EqualizerResult(y_hat=y_hat, decisions=slicer(y_hat, fmt), weights=weights, error=error)


def dfe_equalize(symbols, cfg, fmt='QPSK', reference=None):
    """
    Decision-feedback equalizer: y = w^T u - b^T d with d the past decisions.
    Data-aided on the first `train_len` symbols of `reference`, decision-directed afterwards.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size <= cfg.ff_taps + cfg.train_len:
        raise EqualizerError(
            f'{symbols.size} symbols are not enough for {cfg.ff_taps} taps and {cfg.train_len} training symbols.')
    n_train = 0
    if reference is not None:
        reference = np.asarray(reference, dtype=np.complex128)
        n_train = min(cfg.train_len, reference.size)
    points, _ = constellation(fmt)
    n_taps = cfg.ff_taps
    padded = _padded(symbols, n_taps)
    weights = np.zeros(n_taps, dtype=np.complex128)
    weights[n_taps // 2] = 1.0
    feedback = np.zeros(cfg.fb_taps, dtype=np.complex128)
    # newest decision first
    past = np.zeros(cfg.fb_taps, dtype=np.complex128)
    y_hat = np.empty(symbols.size, dtype=np.complex128)
    decisions = np.empty(symbols.size, dtype=np.complex128)
    error = np.empty(symbols.size, dtype=np.complex128)
    for index in range(symbols.size):
        window = padded[index:index + n_taps]
        y = weights @ window - feedback @ past
        decision = points[np.argmin(np.abs(y - points))]
        target = reference[index] if index < n_train else decision
        err = target - y
        weights += cfg.mu_dfe * err * np.conj(window)
        feedback -= cfg.mu_dfe * err * np.conj(past)
        _check_taps(weights)
        _check_taps(feedback)
        if cfg.fb_taps:
            past = np.roll(past, 1)
            past[0] = target
        y_hat[index] = y
        decisions[index] = decision
        error[index] = err
    logger.debug(f'DFE done, tap norms {np.linalg.norm(weights):.3f} / {np.linalg.norm(feedback):.3f}.')
    return EqualizerResult(
        y_hat=y_hat, decisions=decisions, weights=weights, error=error, feedback=feedback, num_train_symbols=n_train)


def equalize(symbols, cfg, fmt, preamble, reference=None):
    """
    RDE, then static phase alignment (the RDE is phase-blind), then DFE trained on `reference`.
    `symbols` start with the preamble.
    """
    rde = rde_equalize(symbols, cfg, fmt)
    aligned = phase_align(rde.y_hat, preamble)
    return dfe_equalize(aligned, cfg, fmt, reference=reference)


def demap(symbols, fmt):
    """
    Gray hard decisions, inverse of txchain.map_symbols.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if fmt == 'QPSK':
        bits = np.stack((symbols.real < 0, symbols.imag < 0), axis=-1)
    else:
        scaled = symbols * np.sqrt(10)
        # level 3 -> 00, 1 -> 01, -3 -> 10, -1 -> 11
        threshold = np.abs(QAM16_LEVELS[1] - QAM16_LEVELS[0])
        bits = np.stack((
            scaled.real < 0, np.abs(scaled.real) < threshold,
            scaled.imag < 0, np.abs(scaled.imag) < threshold,
        ), axis=-1)
    return bits.astype(np.uint8).reshape(-1)


def demap_count(symbols, reference_bits, fmt):
    symbols = np.asarray(symbols, dtype=np.complex128)
    reference_bits = np.asarray(reference_bits, dtype=np.uint8)
    bps = BITS_PER_SYMBOL[fmt]
    if symbols.size == 0 or symbols.size * bps != reference_bits.size:
        raise ValueError(
            f'{symbols.size} symbols do not match {reference_bits.size} reference bits for {fmt}.')
    # Unit power constellations, the gain is real so that rotations are not corrected
    gain = 1 / np.sqrt(np.mean(np.abs(symbols) ** 2))
    normalized = symbols * gain
    errors = int(np.count_nonzero(demap(normalized, fmt) != reference_bits))
    reference = map_symbols(reference_bits, fmt)
    evm = np.mean(np.abs(normalized - reference) ** 2) / np.mean(np.abs(reference) ** 2)
    evm_db = float(10 * np.log10(max(evm, np.finfo(float).tiny)))
    return Metrics(
        ber=errors / reference_bits.size,
        evm_db=evm_db,
        snr_est_db=-evm_db,
        counted_bits=int(reference_bits.size),
        error_bits=errors,
    )


def _line_and_wideband(freqs, density, occupied_bw):
    df = freqs[1] - freqs[0]
    center = int(np.argmin(np.abs(freqs)))
    line = slice(center - LINE_HALF_WIDTH, center + LINE_HALF_WIDTH + 1)
    side = np.concatenate((
        density[max(center - LINE_HALF_WIDTH - FLOOR_BINS, 0):center - LINE_HALF_WIDTH],
        density[center + LINE_HALF_WIDTH + 1:center + LINE_HALF_WIDTH + 1 + FLOOR_BINS],
    ))
    floor = float(np.median(side)) if side.size else 0.0
    n_line = line.stop - line.start
    line_power = max(float(np.sum(density[line]) - floor * n_line) * df, 0.0)
    band = np.abs(freqs) <= occupied_bw / 2
    band[line] = False
    wideband_power = float(np.sum(density[band]) + floor * n_line) * df
    return line_power, wideband_power


def spectrum_report(sig, segment_len=4096, occupied_bw=None):
    """
    PSD of both polarizations with the carrier line power (excess over the local floor around DC) and
    the wideband power inside `occupied_bw` (the whole band by default) outside the line.
    """
    freqs, psd_x = psd(sig, segment_len, 'x')
    _, psd_y = psd(sig, segment_len, 'y')
    if occupied_bw is None:
        occupied_bw = sig.sample_rate
    line_x, wide_x = _line_and_wideband(freqs, psd_x, occupied_bw)
    line_y, wide_y = _line_and_wideband(freqs, psd_y, occupied_bw)
    return SpectrumReport(freqs, psd_x, psd_y, line_x, line_y, wide_x, wide_y)


def phase_drift(symbols, reference):
    """
    Slope in rad/symbol of the data-aided phase error, no carrier recovery applied.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    reference = np.asarray(reference, dtype=np.complex128)
    if symbols.size != reference.size or symbols.size < 2:
        raise ValueError(f'Cannot regress the phase of {symbols.size} symbols on {reference.size} references.')
    phase = np.unwrap(np.angle(symbols * np.conj(reference)))
    return float(stats.linregress(np.arange(symbols.size), phase).slope)


def apply_frequency_offset(samples, offset, rate):
    samples = np.asarray(samples, dtype=np.complex128)
    return samples * np.exp(2j * np.pi * offset * np.arange(samples.size) / rate)
