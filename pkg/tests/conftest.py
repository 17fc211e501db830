import sys
from pathlib import Path

import numpy as np
import pytest


@pytest.fixture(scope='session', autouse=True)
def add_simulator_to_path():
    path = Path(__file__).resolve().parent.parent
    sys.path.pop(0)  # Remove current dir
    sys.path.insert(0, str(path))


@pytest.fixture
def rng():
    from pmcsh.lib.field import Rng
    return Rng(seed=1234)


@pytest.fixture
def small_conf():
    # 10 Gbaud QPSK, short frame and short control loop, runs in a few seconds
    return {
        'tx.baud': 10e9,
        'tx.samples_per_symbol': 8,
        'tx.preamble_len': 128,
        'run.n_symbols': 2048,
        'run.psd_segment_len': 1024,
        'fiber.length_km': 10.0,
        'controller.max_iters': 300,
        'equalizer.train_len': 256,
        'run.log_level': 'WARNING',
    }


@pytest.fixture
def tone():
    from pmcsh.lib.field import DualPolSignal
    n = 1024
    rate = 64e9
    t = np.arange(n) / rate
    return DualPolSignal(np.exp(2j * np.pi * 1e9 * t), 0.5 * np.ones(n), rate)
