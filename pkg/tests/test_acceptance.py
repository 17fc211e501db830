"""
End-to-end checks of the link against known physical behaviour and closed-form oracles.
"""
import numpy as np
import pytest

from pmcsh.lib import dsp as dsp_lib
from pmcsh.lib import polctl as polctl_lib
from pmcsh.lib import txchain as txchain_lib
from pmcsh.lib.channel import SopTrajectory, random_unitary
from pmcsh.lib.dsp import EqualizerConfig
from pmcsh.lib.field import JonesOperator, Rng, waveplate
from pmcsh.lib.polctl import ControllerParams, LinkContext
from pmcsh.lib.rxfront import EpcState, ReceiverParams
from pmcsh.simulator import LinkSimulator

SIGNAL_MW = 0.3
CARRIER_MW = 5.0


def synthetic_link(rotation):
    u = rotation.matrix
    clean = u @ np.diag([SIGNAL_MW, CARRIER_MW]) @ np.conj(u.T)
    carrier = u @ np.diag([0.0, CARRIER_MW]) @ np.conj(u.T)
    return LinkContext(clean, clean, carrier, ReceiverParams())


def simulate(preset, **overrides):
    conf = {'run.log_level': 'WARNING'}
    conf.update(overrides)
    return LinkSimulator(local_conf=conf, preset=preset, setup_logging=False).simulate()


@pytest.mark.parametrize('initial_sop', ['random', 'rot45'])
def test_spectral_separation(initial_sop):
    result = simulate('sim50g', **{'run.initial_sop': initial_sop})
    assert result.trace.converged
    assert result.extinction_final == pytest.approx(12.0, abs=2.0)
    assert result.carrier_fraction_final > 0.99
    after = result.spectra_after
    # carrier left in the LO branch, modulation in the signal branch
    assert after.line_to_wideband_y > after.line_to_wideband_x + 20
    before = result.spectra_before
    # mixed: both branches carry line and band
    assert before.line_power_x > 0 and before.line_power_y > 0
    assert before.wideband_power_x > 0 and before.wideband_power_y > 0
    suppression = 10 * np.log10(before.line_power_x / max(after.line_power_x, np.finfo(float).tiny))
    assert suppression >= 20


def test_controller_reaches_global_minimum():
    axes = (0.0, np.pi / 4)
    link = synthetic_link(random_unitary(Rng(21), 'oracle'))
    trace = polctl_lib.run_loop(
        link, ControllerParams(max_iters=2000), initial_state=EpcState.zeros(axes=axes))
    assert trace.converged
    reached = link.monitor_power(trace.final_operator)

    grid = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    first = waveplate(axes[0], grid)[:, None]
    second = waveplate(axes[1], grid)[None, :]
    rows = (second @ first)[..., 0, :]
    minimum = np.inf
    # 10^6 settings, row 0 of the controller matrix decides the signal-port power
    for chunk in np.array_split(rows, 10):
        powers = np.einsum('...i,ij,...j->...', chunk, link.received, np.conj(chunk)).real
        minimum = min(minimum, link.receiver.tap_ratio * powers.min())
    assert 10 * np.log10(reached / minimum) <= 0.5


def test_endless_tracking_of_winding_channel():
    params = ControllerParams(max_iters=8000, loop_rate=1000.0)
    traj = SopTrajectory.winding(1.0, 1 / params.loop_rate, params.max_iters)
    assert traj.angles[-1, 1] > 2 * np.pi
    link = synthetic_link(JonesOperator.identity())
    trace = polctl_lib.run_loop(link, params, traj, rng=Rng(3))
    assert trace.iterations == params.max_iters
    assert not trace.diverged
    assert trace.duty_cycle(threshold_db=10.0) >= 0.95
    # no reset: every plate moves by at most one step per iteration
    assert np.max(np.abs(np.diff(trace.retardances, axis=0))) <= params.step_mu + 1e-9


def test_laser_phase_noise_cancels():
    conf = {'run.bypass_dsp': True, 'fiber.osnr_db': 25.0}
    noisy = simulate('exp16g', **conf, **{'laser.linewidth_hz': 10e6})
    clean = simulate('exp16g', **conf, **{'laser.linewidth_hz': 0.0})
    n_pre = noisy.frame.preamble.size
    drift = dsp_lib.phase_drift(noisy.symbols_bypass[n_pre:], noisy.frame.payload)
    assert abs(drift) < 1e-5

    n_bits = noisy.metrics_bypass.counted_bits
    p = max((noisy.metrics_bypass.error_bits + clean.metrics_bypass.error_bits) / (2 * n_bits), 1 / n_bits)
    assert abs(noisy.metrics_bypass.ber - clean.metrics_bypass.ber) <= 3 * np.sqrt(2 * p * (1 - p) / n_bits)


@pytest.mark.parametrize('ebn0_db', [4.0, 6.0, 8.0])
def test_qpsk_ber_matches_theory(ebn0_db):
    n_bits = 10 ** 7
    rng = Rng(77)
    bits = txchain_lib.gen_bits(rng, n_bits, order=23)
    # unit symbol energy, two bits per symbol
    n0 = 0.5 / 10 ** (ebn0_db / 10)
    gen = rng.stream('awgn')
    errors = 0
    for chunk in np.array_split(bits, 10):
        symbols = txchain_lib.map_symbols(chunk, 'QPSK')
        noise = gen.normal(0.0, np.sqrt(n0 / 2), size=(2, symbols.size))
        errors += dsp_lib.demap_count(symbols + noise[0] + 1j * noise[1], chunk, 'QPSK').error_bits
    expected = float(dsp_lib.q_function(np.sqrt(2 * 10 ** (ebn0_db / 10))))
    assert abs(errors / n_bits - expected) <= 3 * np.sqrt(expected * (1 - expected) / n_bits)


def test_equalizer_gain_on_16qam_isi_channel():
    rng = Rng(31)
    taps = np.array([1.0, 0.3, 0.1])
    preamble = txchain_lib.preamble_symbols(256)
    bits = txchain_lib.gen_bits(rng, 8000 * 4, order=23)
    reference = np.concatenate((preamble, txchain_lib.map_symbols(bits, 'QAM16')))
    received = np.convolve(reference, taps)[:reference.size] / np.linalg.norm(taps)
    # OSNR 25 dB in 12.5 GHz seen by a 16 Gbaud signal
    snr = 10 ** 2.5 * 12.5e9 / 16e9
    gen = rng.stream('awgn')
    received = received + np.sqrt(0.5 / snr) * (gen.normal(size=received.size) + 1j * gen.normal(size=received.size))

    bypass = dsp_lib.demap_count(dsp_lib.phase_align(received, preamble)[256:], bits, 'QAM16')
    cfg = EqualizerConfig(mu_dfe=2e-3, train_len=2000)
    result = dsp_lib.equalize(received, cfg, 'QAM16', preamble, reference=reference)
    tail = slice(4000, None)
    equalized = dsp_lib.demap_count(result.y_hat[256:][tail], bits[4000 * 4:], 'QAM16')
    assert equalized.evm_db <= bypass.evm_db - 6
    assert equalized.ber < 1e-2


def test_mixed_polarizations_without_control(small_conf):
    small_conf.update({
        'run.control': 'off',
        'run.initial_sop': 'rot45',
        'run.bypass_dsp': True,
        'fiber.sop_drift_rate': 0.0,
        'tx.preamble_len': 256,
    })
    result = LinkSimulator(local_conf=small_conf, setup_logging=False).simulate()
    assert result.extinction_final == pytest.approx(0.0, abs=1.0)
    assert result.metrics.ber >= 0.15


def test_osnr_sweep_is_monotonic(small_conf, tmp_path):
    simulator = LinkSimulator(local_conf=small_conf, setup_logging=False)
    rows = simulator.sweep('osnr', [14.0, 20.0, 26.0], tmp_path)
    bers = [row[2] for row in rows]
    assert all(row[-1] == '' for row in rows)
    assert all(later <= earlier for earlier, later in zip(bers, bers[1:]))
