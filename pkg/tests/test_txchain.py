import numpy as np
import pytest

from pmcsh.lib import txchain as txchain_lib
from pmcsh.lib.field import Rng, total_power
from pmcsh.lib.txchain import LaserParams, ModulatorParams, TxConfig


def test_prbs_period(rng):
    # PRBS-15 repeats every 2^15 - 1 bits and holds 2^14 ones per period
    period = 2 ** 15 - 1
    bits = txchain_lib.gen_bits(rng, 2 * period + 10, order=15)
    np.testing.assert_array_equal(bits[:period + 10], bits[period:2 * period + 10])
    assert int(bits[:period].sum()) == 2 ** 14
    for shift in (1, 7, 1000, period - 1):
        assert not np.array_equal(bits[:100], bits[shift:shift + 100])


@pytest.mark.parametrize('order, tap', [(15, 14), (23, 18)])
def test_prbs_recurrence(rng, order, tap):
    bits = txchain_lib.gen_bits(rng, 5000, order=order).astype(int)
    np.testing.assert_array_equal(bits[order:], bits[tap:tap - order] ^ bits[:-order])
    # the seed state comes first
    seed = Rng(1234).stream('prbs').integers(0, 2, size=order, dtype=np.uint8)
    np.testing.assert_array_equal(bits[:order], seed)


def test_prbs_errors(rng):
    with pytest.raises(ValueError):
        txchain_lib.gen_bits(rng, 0)
    with pytest.raises(ValueError):
        txchain_lib.gen_bits(rng, 10, order=7)


def test_prbs_seeded():
    first = txchain_lib.gen_bits(Rng(1), 64)
    np.testing.assert_array_equal(first, txchain_lib.gen_bits(Rng(1), 64))
    assert not np.array_equal(first, txchain_lib.gen_bits(Rng(2), 64))


@pytest.mark.parametrize('fmt', ['QPSK', 'QAM16'])
def test_gray_adjacency(fmt):
    # nearest neighbours differ by exactly one bit
    points, labels = txchain_lib.constellation(fmt)
    assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0)
    distances = np.abs(points[:, None] - points[None, :])
    np.fill_diagonal(distances, np.inf)
    closest = distances.min()
    for a, b in zip(*np.nonzero(np.isclose(distances, closest))):
        assert np.count_nonzero(labels[a] != labels[b]) == 1


def test_map_symbols():
    np.testing.assert_allclose(txchain_lib.map_symbols([0, 0, 1, 1], 'QPSK'), np.array([1 + 1j, -1 - 1j]) / np.sqrt(2))
    np.testing.assert_allclose(txchain_lib.map_symbols([0, 0, 0, 0], 'QAM16'), (3 + 3j) / np.sqrt(10))
    with pytest.raises(ValueError):
        txchain_lib.map_symbols([0, 1, 1], 'QPSK')
    with pytest.raises(ValueError):
        txchain_lib.map_symbols([0, 1], '8PSK')


def test_rrc_taps():
    cfg = TxConfig(samples_per_symbol=8)
    sps = cfg.samples_per_symbol
    taps = txchain_lib.rrc_taps(cfg.rolloff, cfg.filter_span, sps)
    assert taps.size == cfg.filter_span * sps + 1
    assert np.sum(taps ** 2) == pytest.approx(sps)
    np.testing.assert_allclose(taps, taps[::-1])
    # matched pair is a raised-cosine Nyquist pulse
    pulse = np.convolve(taps, taps) / sps
    center = pulse.size // 2
    assert pulse[center] == pytest.approx(1.0, rel=1e-3)
    offsets = np.arange(sps, center + 1, sps)
    isi = np.abs(np.concatenate((pulse[center + offsets], pulse[center - offsets]))) / pulse[center]
    assert isi.max() < 1e-3


def test_rrc_shape_impulse():
    cfg = TxConfig(samples_per_symbol=8, filter_span=8)
    symbols = np.zeros(16)
    symbols[8] = 1
    shaped = txchain_lib.rrc_shape(symbols, cfg)
    assert shaped.size == 16 * 8
    taps = txchain_lib.rrc_taps(cfg.rolloff, cfg.filter_span, 8)
    np.testing.assert_allclose(shaped[64 - 32:64 + 33].real, taps, atol=1e-12)
    with pytest.raises(ValueError):
        txchain_lib.rrc_shape([], cfg)


def test_laser_field(rng):
    params = LaserParams(power=10.0, linewidth=0.0, launch_azimuth=45.0)
    light = txchain_lib.laser_field(params, 256, 160e9, rng)
    assert total_power(light) == pytest.approx(10.0)
    np.testing.assert_allclose(np.abs(light.samples_x) ** 2, 5.0)
    np.testing.assert_allclose(light.samples_x, light.samples_y, atol=1e-12)

    noisy = txchain_lib.laser_field(LaserParams(linewidth=10e6), 4096, 160e9, rng)
    phase = np.unwrap(np.angle(noisy.samples_x))
    assert np.std(np.diff(phase)) == pytest.approx(np.sqrt(2 * np.pi * 10e6 / 160e9), rel=0.1)


def test_iq_modulate():
    carrier = np.ones(4, dtype=complex)
    drive = np.array([1, 1j, -1, 0])
    out = txchain_lib.iq_modulate(carrier, drive, ModulatorParams(insertion_loss=20.0))
    np.testing.assert_allclose(out, drive * 0.1)
    mzm = txchain_lib.iq_modulate(carrier, drive, ModulatorParams(insertion_loss=0.0, transfer='mzm_sine'))
    # small signal drive stays nearly linear
    np.testing.assert_allclose(mzm / mzm[0], drive, atol=1e-3)
    with pytest.raises(ValueError):
        txchain_lib.iq_modulate(carrier, drive[:3], ModulatorParams())


def test_build_tx(rng):
    cfg = TxConfig(baud=10e9, samples_per_symbol=8, preamble_len=64)
    frame = txchain_lib.make_frame(cfg, 512, rng)
    assert frame.bits.size == 1024
    assert frame.symbols.size == 576
    np.testing.assert_array_equal(frame.preamble, txchain_lib.preamble_symbols(64))
    laser = LaserParams(power=10.0, linewidth=0.0)
    sig = txchain_lib.build_tx(cfg, laser, ModulatorParams(insertion_loss=12.0), rng, n_symbols=512)
    assert len(sig) == 576 * 8
    assert sig.sample_rate == 80e9
    # carrier keeps half of the laser, signal is attenuated by the modulator
    assert np.mean(np.abs(sig.samples_y) ** 2) == pytest.approx(5.0)
    assert np.mean(np.abs(sig.samples_x) ** 2) == pytest.approx(5.0 * 10 ** -1.2, rel=0.1)
    # the same streams give back the transmitted frame
    expected = txchain_lib.rrc_shape(frame.symbols, cfg) * np.sqrt(5.0) * 10 ** -0.6
    np.testing.assert_allclose(sig.samples_x, expected, atol=1e-12)


def test_build_tx_default_payload(rng):
    cfg = TxConfig(baud=10e9, samples_per_symbol=4, preamble_len=16)
    sig = txchain_lib.build_tx(cfg, LaserParams(linewidth=0.0), ModulatorParams(), rng)
    assert len(sig) == (txchain_lib.DEFAULT_PAYLOAD_SYMBOLS + 16) * 4


def test_tx_config_validation():
    with pytest.raises(ValueError):
        TxConfig(format='8PSK')
    with pytest.raises(ValueError):
        TxConfig(samples_per_symbol=3)
    with pytest.raises(ValueError):
        TxConfig(rolloff=0.0)
    assert TxConfig(format='QAM16').bits_per_symbol == 4
