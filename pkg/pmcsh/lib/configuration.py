"""
PMC-SH simulator configuration library
This module is not intended to be used directly, only the simulator class should be used.
"""
from dataclasses import dataclass
from pathlib import Path
import json
import logging
import math
import re

from ..conf import BASE_CONF, PRESETS
from .channel import FiberParams
from .dsp import EqualizerConfig
from .polctl import ControllerParams
from .rxfront import EPC_AXES, ReceiverParams
from .txchain import LaserParams, ModulatorParams, TxConfig

logger = logging.getLogger(__name__)

CONTROL_MODES = ('adaptive', 'manual_angles', 'off')
INITIAL_SOPS = ('random', 'identity', 'rot45')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
# Keys of a configuration file that are not configuration values
PRESET_KEY = 'preset'
LITERALS = {'True': True, 'False': False, 'None': None}
# Float keys where +inf disables the stage
UNBOUNDED_KEYS = ('fiber.osnr_db',)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    tx: TxConfig
    laser: LaserParams
    modulator: ModulatorParams
    fiber: FiberParams
    receiver: ReceiverParams
    controller: ControllerParams
    equalizer: EqualizerConfig
    osnr_db: float = 25.0
    seed: int = 1
    n_symbols: int = 16384
    bypass_dsp: bool = False
    control: str = 'adaptive'
    initial_sop: str = 'random'
    manual_angles: tuple = (0.0, 0.0, 0.0, 0.0)
    psd_segment_len: int = 4096
    log_level: str = 'INFO'

    @property
    def n_samples(self):
        return (self.n_symbols + self.tx.preamble_len) * self.tx.samples_per_symbol


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f'Unknown preset "{name}", valid presets: {", ".join(PRESETS)}.') from None


def decode_value(text):
    text = text.strip()
    if text in LITERALS:
        return LITERALS[text]
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return float(text)
    except ValueError:
        return text.strip('\'"')


def parse_text(content, origin='<text>'):
    """
    Parses `key = value` lines, `#` and `//` start comments.
    """
    conf = {}
    for number, line in enumerate(content.split('\n'), start=1):
        line = re.sub(r'\s*(#|//).*$', '', line).strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(f'Invalid line {number} in "{origin}", expected "key = value": {line}')
        key, value = line.split('=', 1)
        conf[key.strip()] = decode_value(value)
    return conf


def read_conf_file(path):
    if not path.exists():
        raise ConfigurationError(f'Configuration file "{path}" does not exist.')
    try:
        content = path.read_text(encoding='utf-8')
    except UnicodeDecodeError as err:
        raise ConfigurationError(f'Configuration file "{path}" is not valid UTF-8: {err}') from err
    except OSError as err:
        raise ConfigurationError(f'Configuration file "{path}" cannot be read: {err}') from err
    if path.suffix == '.json':
        content = re.sub(r'\n\s*//.*', '\n', content)  # Remove comments
        try:
            conf_mod = json.loads(content) if content.strip() else None
        except json.JSONDecodeError as err:
            raise ConfigurationError(f'The configuration in "{path}" is not valid JSON: {err}') from err
        if conf_mod is not None and not isinstance(conf_mod, dict):
            raise ConfigurationError(f'The configuration in "{path}" is not a dict.')
    else:
        conf_mod = parse_text(content, path)
    if not conf_mod:
        logger.debug(f'Config file "{path}" is empty.')
    else:
        logger.debug(f'Config file "{path}" loaded.')
    return conf_mod or {}


def _merge(conf, conf_mod, origin):
    for key, val in conf_mod.items():
        if key.startswith('_') or key == PRESET_KEY:
            continue
        if key not in BASE_CONF:
            raise ConfigurationError(f'Unknown configuration key "{key}" in {origin}.')
        conf[key] = val


def load_conf(default_conf=None, local_conf=None, preset=None):
    # Copy default configuration
    conf = BASE_CONF.copy()
    if preset:
        conf.update(get_preset(preset))
    # Update with default and local configuration
    for conf_override in (default_conf, local_conf):
        if not conf_override:
            continue

        if isinstance(conf_override, str):
            conf_override = Path(conf_override)

        if isinstance(conf_override, Path):
            # Configuration file
            conf_mod = read_conf_file(conf_override)
            origin = f'"{conf_override}"'
        elif isinstance(conf_override, dict):
            # Configuration dict
            conf_mod = conf_override
            origin = 'the configuration dict'
        else:
            raise ConfigurationError('Unsupported type for configuration.')
        if conf_mod.get(PRESET_KEY):
            conf.update(get_preset(conf_mod[PRESET_KEY]))
        _merge(conf, conf_mod, origin)
    return conf


def format_conf(conf):
    lines = []
    for key, val in conf.items():
        lines.append(f'{key} = {json.dumps(val)}')
    return '\n'.join(lines) + '\n'


def _value(conf, key, kind):
    val = conf[key]
    try:
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError(f'expected a boolean, got {val!r}')
            return val
        if kind is int:
            if isinstance(val, bool) or float(val) != int(val):
                raise TypeError(f'expected an integer, got {val!r}')
            return int(val)
        if kind is float:
            if isinstance(val, bool):
                raise TypeError(f'expected a number, got {val!r}')
            number = float(val)
            if math.isnan(number) or (math.isinf(number) and not (key in UNBOUNDED_KEYS and number > 0)):
                raise ValueError(f'expected a finite number, got {val!r}')
            return number
        if not isinstance(val, str):
            raise TypeError(f'expected a string, got {val!r}')
        return val
    except (TypeError, ValueError, OverflowError) as err:
        raise ConfigurationError(f'Invalid value for "{key}": {err}') from err


def _choice(conf, key, choices):
    val = _value(conf, key, str)
    if val not in choices:
        raise ConfigurationError(f'Out of range value for "{key}": "{val}" is not one of {", ".join(choices)}.')
    return val


def _block(section, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as err:
        raise ConfigurationError(f'Out of range value in the "{section}" configuration: {err}') from err


def check_conf(conf):
    """
    Builds the typed scenario from a merged configuration and checks cross-field consistency.
    """
    tx = _block(
        'tx', TxConfig,
        format=_choice(conf, 'tx.format', ('QPSK', 'QAM16')),
        baud=_value(conf, 'tx.baud', float),
        rolloff=_value(conf, 'tx.rolloff', float),
        samples_per_symbol=_value(conf, 'tx.samples_per_symbol', int),
        prbs_order=_value(conf, 'tx.prbs_order', int),
        preamble_len=_value(conf, 'tx.preamble_len', int),
        filter_span=_value(conf, 'tx.filter_span', int),
    )
    laser = _block(
        'laser', LaserParams,
        power=_value(conf, 'laser.power_mw', float),
        linewidth=_value(conf, 'laser.linewidth_hz', float),
        launch_azimuth=_value(conf, 'laser.launch_azimuth_deg', float),
        wavelength=_value(conf, 'laser.wavelength_nm', float) * 1e-9,
    )
    modulator = _block(
        'modulator', ModulatorParams,
        insertion_loss=_value(conf, 'modulator.insertion_loss_db', float),
        v_pi=_value(conf, 'modulator.v_pi', float),
        drive_vpp=_value(conf, 'modulator.drive_vpp', float),
        transfer=_choice(conf, 'modulator.transfer', ('ideal_linear', 'mzm_sine')),
    )
    fiber = _block(
        'fiber', FiberParams,
        length=_value(conf, 'fiber.length_km', float),
        dispersion_D=_value(conf, 'fiber.dispersion_ps_nm_km', float),
        slope_S=_value(conf, 'fiber.slope_ps_nm2_km', float),
        atten=_value(conf, 'fiber.atten_db_km', float),
        dgd_mean=None if conf['fiber.dgd_mean_ps'] is None else _value(conf, 'fiber.dgd_mean_ps', float),
        sop_drift_rate=_value(conf, 'fiber.sop_drift_rate', float),
        ref_wavelength=laser.wavelength,
    )
    receiver = _block(
        'receiver', ReceiverParams,
        tap_ratio=_value(conf, 'receiver.tap_ratio', float),
        responsivity=_value(conf, 'receiver.responsivity', float),
        thermal_noise_std=_value(conf, 'receiver.thermal_noise_pa', float) * 1e-12,
        shot_noise=_value(conf, 'receiver.shot_noise', bool),
        monitor_bw=_value(conf, 'receiver.monitor_bw_hz', float),
        pd_bw=_value(conf, 'receiver.pd_bw_hz', float),
    )
    controller = _block(
        'controller', ControllerParams,
        step_mu=_value(conf, 'controller.step_mu', float),
        dither_delta=_value(conf, 'controller.dither_delta', float),
        loop_rate=_value(conf, 'controller.loop_rate', float),
        max_iters=_value(conf, 'controller.max_iters', int),
        converge_tol=_value(conf, 'controller.converge_tol_db', float),
        window=_value(conf, 'controller.window', int),
        monitor_averages=_value(conf, 'controller.monitor_averages', int),
        perturbation=_choice(conf, 'controller.perturbation', ('sequential', 'spsa')),
    )
    equalizer = _block(
        'equalizer', EqualizerConfig,
        ff_taps=_value(conf, 'equalizer.ff_taps', int),
        fb_taps=_value(conf, 'equalizer.fb_taps', int),
        mu_rde=_value(conf, 'equalizer.mu_rde', float),
        mu_dfe=_value(conf, 'equalizer.mu_dfe', float),
        train_len=_value(conf, 'equalizer.train_len', int),
    )

    manual_angles = conf['controller.manual_angles']
    if not isinstance(manual_angles, (list, tuple)) or len(manual_angles) != len(EPC_AXES):
        raise ConfigurationError(
            'Invalid value for "controller.manual_angles": '
            f'expected {len(EPC_AXES)} retardances, got {manual_angles!r}.')
    try:
        manual_angles = tuple(float(angle) for angle in manual_angles)
    except (TypeError, ValueError) as err:
        raise ConfigurationError(f'Invalid value for "controller.manual_angles": {err}') from err
    if not all(math.isfinite(angle) for angle in manual_angles):
        raise ConfigurationError(f'Invalid value for "controller.manual_angles": {manual_angles!r} is not finite.')

    scenario = Scenario(
        tx=tx,
        laser=laser,
        modulator=modulator,
        fiber=fiber,
        receiver=receiver,
        controller=controller,
        equalizer=equalizer,
        osnr_db=_value(conf, 'fiber.osnr_db', float),
        seed=_value(conf, 'run.seed', int),
        n_symbols=_value(conf, 'run.n_symbols', int),
        bypass_dsp=_value(conf, 'run.bypass_dsp', bool),
        control=_choice(conf, 'run.control', CONTROL_MODES),
        initial_sop=_choice(conf, 'run.initial_sop', INITIAL_SOPS),
        manual_angles=manual_angles,
        psd_segment_len=_value(conf, 'run.psd_segment_len', int),
        log_level=_choice(conf, 'run.log_level', LOG_LEVELS),
    )
    _check_consistency(scenario)
    return scenario


def _check_consistency(scenario):
    if not 0 <= scenario.seed < 2 ** 64:
        raise ConfigurationError(
            f'Out of range value for "run.seed": {scenario.seed} is not a 64-bit unsigned integer.')
    if scenario.n_symbols < 1:
        raise ConfigurationError(f'Out of range value for "run.n_symbols": {scenario.n_symbols}.')
    if scenario.tx.preamble_len < 1:
        raise ConfigurationError('Out of range value for "tx.preamble_len": the receiver needs a preamble.')
    segment = scenario.psd_segment_len
    if segment < 2 or segment & (segment - 1) or segment > scenario.n_samples:
        raise ConfigurationError(
            f'Out of range value for "run.psd_segment_len": {segment} must be a power of two '
            f'not longer than the {scenario.n_samples} samples of a frame.')
    if not scenario.bypass_dsp:
        needed = scenario.equalizer.ff_taps + scenario.equalizer.train_len
        if scenario.n_symbols + scenario.tx.preamble_len <= needed:
            raise ConfigurationError(
                f'The frame is too short for the equalizers: more than {needed} symbols are needed.')


def parse_config(path, preset=None):
    return check_conf(load_conf(local_conf=Path(path), preset=preset))
