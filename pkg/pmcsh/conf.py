# PMC-SH link simulator base configuration
# This file should not be modified directly, put your modification in another file and give the path to the simulator.
# The values below are the `sim50g` preset.

BASE_CONF = {
    # Logging level
    'run.log_level': 'INFO',

    # Seed of every random stream (64-bit unsigned)
    'run.seed': 1,

    # Payload symbols per frame (the preamble comes on top)
    'run.n_symbols': 16384,

    # Skip the equalizers, only matched filter + static phase alignment
    # Metrics of the bypass chain are always reported
    'run.bypass_dsp': False,

    # Polarization control: 'adaptive', 'manual_angles' or 'off'
    'run.control': 'adaptive',

    # Static SOP rotation drawn for the fiber: 'random', 'identity' or 'rot45'
    'run.initial_sop': 'random',

    # Welch segment length of the exported spectra (power of two)
    'run.psd_segment_len': 4096,

    # Modulation format: 'QPSK' or 'QAM16'
    # 50 Gbaud QPSK system of the simulation study
    'tx.format': 'QPSK',
    'tx.baud': 50e9,

    # Root-raised-cosine rolloff and span in symbols
    # Not given in the source; 0.1 keeps the spectra compact
    # 128 symbols keep the truncated matched pair below 1e-3 ISI
    'tx.rolloff': 0.1,
    'tx.filter_span': 128,

    # Simulation oversampling (not given in the source)
    'tx.samples_per_symbol': 16,

    # Payload PRBS order: 15 or 23
    'tx.prbs_order': 15,

    # Known QPSK preamble for synchronization, in symbols
    'tx.preamble_len': 256,

    # Laser power of 10 mW of the simulation study
    'laser.power_mw': 10.0,
    'laser.linewidth_hz': 100e3,

    # 45 degrees gives an equal split between the two PBS outputs
    'laser.launch_azimuth_deg': 45.0,
    'laser.wavelength_nm': 1550.0,

    # Modulator insertion loss of 12 dB of the simulation study
    'modulator.insertion_loss_db': 12.0,
    # Transfer: 'ideal_linear' or 'mzm_sine'
    'modulator.transfer': 'ideal_linear',
    # V_pi is not given in the source; 350 mVpp drive of the experiment
    'modulator.v_pi': 3.5,
    'modulator.drive_vpp': 0.35,

    # 20 km SSMF: D = 16 ps/(nm.km), slope 0.08 ps/(nm^2.km), 0.2 dB/km
    'fiber.length_km': 20.0,
    'fiber.dispersion_ps_nm_km': 16.0,
    'fiber.slope_ps_nm2_km': 0.08,
    'fiber.atten_db_km': 0.2,

    # Mean DGD in ps
    # Use None for 0.1 ps per sqrt(km) of fiber
    'fiber.dgd_mean_ps': None,

    # SOP drift rate in rad/s (use 50 for the "fast" stress preset)
    'fiber.sop_drift_rate': 1.0,

    # OSNR in 12.5 GHz, 25 dB in the simulation study
    # Use inf to disable the ASE loading
    'fiber.osnr_db': 25.0,

    # About 10% of the signal-port power goes to the monitor photodetector
    'receiver.tap_ratio': 0.10,
    'receiver.responsivity': 0.8,
    # Thermal noise density in pA/sqrt(Hz)
    'receiver.thermal_noise_pa': 15.0,
    'receiver.shot_noise': True,
    # Low bandwidth monitor photodetector
    'receiver.monitor_bw_hz': 100e3,
    # Balanced photodetector bandwidth, 0 for ideal electronics
    'receiver.pd_bw_hz': 0.0,

    # Gradient descent controller
    'controller.step_mu': 0.05,
    'controller.dither_delta': 0.02,
    'controller.loop_rate': 1000.0,
    'controller.max_iters': 2000,
    # Converged when the monitor power moves less than this over the window
    'controller.converge_tol_db': 0.1,
    'controller.window': 50,
    # Monitor samples averaged per reading
    'controller.monitor_averages': 32,
    # Perturbation scheme: 'sequential' or 'spsa'
    'controller.perturbation': 'sequential',
    # EPC retardances used when run.control is 'manual_angles'
    'controller.manual_angles': [0.0, 0.0, 0.0, 0.0],

    # Receive equalizers (RDE then DFE)
    'equalizer.ff_taps': 15,
    'equalizer.fb_taps': 5,
    'equalizer.mu_rde': 1e-3,
    'equalizer.mu_dfe': 1e-3,
    'equalizer.train_len': 1000,
}

PRESETS = {
    # Simulation study: 50 Gbaud QPSK, 20 km, OSNR 25 dB
    'sim50g': {},

    # Experiments: 10 km SSMF, modulator adding 13 dB insertion loss, 90/10 tap
    'exp10g': {
        'tx.baud': 10e9,
        'fiber.length_km': 10.0,
        'modulator.insertion_loss_db': 13.0,
        'receiver.tap_ratio': 0.10,
    },
    'exp16g': {
        'tx.baud': 16e9,
        'fiber.length_km': 10.0,
        'modulator.insertion_loss_db': 13.0,
        'receiver.tap_ratio': 0.10,
    },
    'exp10g-16qam': {
        'tx.format': 'QAM16',
        'tx.baud': 10e9,
        'fiber.length_km': 10.0,
        'modulator.insertion_loss_db': 13.0,
        'receiver.tap_ratio': 0.10,
    },
    'exp16g-16qam': {
        'tx.format': 'QAM16',
        'tx.baud': 16e9,
        'fiber.length_km': 10.0,
        'modulator.insertion_loss_db': 13.0,
        'receiver.tap_ratio': 0.10,
    },

    # Zero-length loopback without ASE
    'b2b': {
        'fiber.length_km': 0.0,
        'fiber.osnr_db': float('inf'),
        'fiber.sop_drift_rate': 0.0,
        'run.initial_sop': 'identity',
    },
}

DEFAULT_PRESET = 'sim50g'
