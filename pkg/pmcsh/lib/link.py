"""
Link pipeline library
Wires transmitter, fiber, controller, receiver front-end and DSP for one scenario run.
This module is not intended to be used directly, only the simulator class should be used.
"""
from dataclasses import dataclass
import logging

import numpy as np

from . import channel as channel_lib
from . import dsp as dsp_lib
from . import polctl as polctl_lib
from . import rxfront as rxfront_lib
from . import txchain as txchain_lib
from .field import JonesOperator, apply_jones, coherency, stokes_from_coherency

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LinkResult:
    frame: txchain_lib.TxFrame
    trace: polctl_lib.ControllerTrace
    spectra_before: dsp_lib.SpectrumReport
    spectra_after: dsp_lib.SpectrumReport
    iq: rxfront_lib.IqWaveforms
    symbols_bypass: np.ndarray
    metrics_bypass: dsp_lib.Metrics
    symbols_equalized: np.ndarray = None
    metrics_equalized: dsp_lib.Metrics = None
    dgd_ps: float = 0.0
    stokes_received: np.ndarray = None

    @property
    def metrics(self):
        return self.metrics_equalized if self.metrics_equalized is not None else self.metrics_bypass

    @property
    def extinction_final(self):
        return float(self.trace.extinction_db[-1])

    @property
    def carrier_fraction_final(self):
        return float(self.trace.carrier_fraction[-1])


def static_rotation(scenario, rng):
    if scenario.initial_sop == 'identity':
        return JonesOperator.identity()
    if scenario.initial_sop == 'rot45':
        return channel_lib.linear_rotation(np.pi / 4)
    return channel_lib.random_unitary(rng, 'sop_static')


def drift_trajectory(scenario, rng):
    ctl = scenario.controller
    dt = 1 / ctl.loop_rate
    if scenario.fiber.sop_drift_rate == 0:
        return channel_lib.SopTrajectory.static(dt, ctl.max_iters)
    return channel_lib.SopTrajectory.random_walk(scenario.fiber.sop_drift_rate, dt, ctl.max_iters, rng)


def transmit_and_propagate(scenario, rng):
    """
    Returns the frame, the received carrier-only, noise-free and noisy fields, and the DGD drawn.
    The channel is linear so the two branches of the transmitter propagate separately.
    """
    frame = txchain_lib.make_frame(scenario.tx, scenario.n_symbols, rng)
    tx_field = txchain_lib.build_tx(scenario.tx, scenario.laser, scenario.modulator, rng, scenario.n_symbols)

    rotation = static_rotation(scenario, rng)
    dgd = channel_lib.draw_dgd(scenario.fiber, rng)
    pmd_axes = channel_lib.random_unitary(rng, 'pmd_axes')
    zeros = np.zeros(len(tx_field))
    signal_only = channel_lib.propagate(
        tx_field.replace(tx_field.samples_x, zeros), scenario.fiber, rotation, dgd, pmd_axes)
    carrier_only = channel_lib.propagate(
        tx_field.replace(zeros, tx_field.samples_y), scenario.fiber, rotation, dgd, pmd_axes)
    clean = signal_only.replace(
        signal_only.samples_x + carrier_only.samples_x, signal_only.samples_y + carrier_only.samples_y)
    received = channel_lib.load_osnr(clean, scenario.osnr_db, rng)
    logger.debug(f'Channel drawn: DGD {dgd:.4f} ps, initial SOP "{scenario.initial_sop}".')
    return frame, carrier_only, clean, received, dgd


def control(scenario, link, traj, rng):
    if scenario.control == 'adaptive':
        return polctl_lib.run_loop(link, scenario.controller, traj, rng=rng)
    if scenario.control == 'manual_angles':
        state = rxfront_lib.EpcState(scenario.manual_angles)
    else:
        state = rxfront_lib.EpcState.zeros()
    return polctl_lib.hold(link, state, traj)


def receive(scenario, received, operator, rng):
    out = apply_jones(received, operator)
    branch_sig, branch_lo = rxfront_lib.pbs_split(out)
    main, _ = rxfront_lib.tap(branch_sig, scenario.receiver.tap_ratio)
    iq = rxfront_lib.hybrid_bpd(main, branch_lo, out.sample_rate, scenario.receiver, rng)
    return out, iq


def run_dsp(scenario, frame, iq):
    preamble = frame.preamble
    n_pre = preamble.size
    symbols = dsp_lib.matched_filter_downsample(iq, scenario.tx, preamble)
    aligned = dsp_lib.phase_align(symbols, preamble)
    bypass = aligned[n_pre:]
    metrics_bypass = dsp_lib.demap_count(bypass, frame.bits, scenario.tx.format)
    logger.info(f'Bypass DSP: BER {metrics_bypass.ber:.3e}, EVM {metrics_bypass.evm_db:.2f} dB.')
    if scenario.bypass_dsp:
        return aligned, metrics_bypass, None, None
    result = dsp_lib.equalize(symbols, scenario.equalizer, scenario.tx.format, preamble, reference=frame.symbols)
    equalized = result.y_hat
    # symbols the DFE was trained on are known to it and not counted
    start = max(result.num_train_symbols, n_pre)
    skipped_bits = (start - n_pre) * scenario.tx.bits_per_symbol
    metrics = dsp_lib.demap_count(equalized[start:], frame.bits[skipped_bits:], scenario.tx.format)
    logger.info(f'RDE-DFE: BER {metrics.ber:.3e}, EVM {metrics.evm_db:.2f} dB.')
    return aligned, metrics_bypass, equalized, metrics


def simulate(scenario, rng):
    frame, carrier_only, clean, received, dgd = transmit_and_propagate(scenario, rng)
    link = polctl_lib.LinkContext.from_signals(received, clean, carrier_only, scenario.receiver)
    traj = drift_trajectory(scenario, rng)

    initial_operator = rxfront_lib.epc_jones(rxfront_lib.EpcState.zeros()) @ channel_lib.drift_step(traj, 0.0)
    trace = control(scenario, link, traj, rng)
    logger.info(
        f'Control "{scenario.control}": {trace.iterations} iterations, '
        f'extinction {trace.extinction_db[-1]:.2f} dB, carrier fraction {trace.carrier_fraction[-1]:.4f}.')

    out, iq = receive(scenario, received, trace.final_operator, rng)
    occupied = scenario.tx.baud * (1 + scenario.tx.rolloff)
    before = apply_jones(received, initial_operator)
    spectra_before = dsp_lib.spectrum_report(before, scenario.psd_segment_len, occupied)
    spectra_after = dsp_lib.spectrum_report(out, scenario.psd_segment_len, occupied)

    aligned, metrics_bypass, equalized, metrics = run_dsp(scenario, frame, iq)
    return LinkResult(
        frame=frame,
        trace=trace,
        spectra_before=spectra_before,
        spectra_after=spectra_after,
        iq=iq,
        symbols_bypass=aligned,
        metrics_bypass=metrics_bypass,
        symbols_equalized=equalized,
        metrics_equalized=metrics,
        dgd_ps=dgd,
        stokes_received=stokes_from_coherency(coherency(received)),
    )

