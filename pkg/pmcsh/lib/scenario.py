"""
PMC-SH simulator scenario library
Single runs and one-axis parameter sweeps.
This module is not intended to be used directly, only the simulator class should be used.
"""
from pathlib import Path
import logging
import math

from . import configuration as configuration_lib
from . import link as link_lib
from . import report as report_lib

logger = logging.getLogger(__name__)

SWEEP_AXES = {
    'osnr': 'fiber.osnr_db',
    'baud': 'tx.baud',
    'drift_rate': 'fiber.sop_drift_rate',
    'length': 'fiber.length_km',
}
SWEEP_FILE = 'sweep.csv'
SWEEP_HEADER = ('point', 'value', 'ber', 'evm_db', 'extinction_db', 'duty_cycle', 'converged', 'error')


def run_scenario(simulator, out_dir):
    scenario = simulator.check_conf()
    logger.info(f'Running scenario with seed {scenario.seed}, results in "{out_dir}".')
    result = link_lib.simulate(scenario, simulator.rng)
    return report_lib.write_report(scenario, result, out_dir)


def parse_values(text):
    try:
        values = [float(val) for val in text.split(',') if val.strip()]
    except ValueError as err:
        raise configuration_lib.ConfigurationError(f'Invalid sweep values "{text}": {err}') from err
    return values


def sweep(simulator, axis, values, out_dir):
    """
    Runs the scenario once per value of `axis`, each point in its own `point_XXX` directory
    with its own random streams. A failing point is recorded and the sweep goes on.
    Returns the rows written in the sweep CSV.
    """
    if axis not in SWEEP_AXES:
        raise configuration_lib.ConfigurationError(
            f'Unknown sweep axis "{axis}", valid axes: {", ".join(SWEEP_AXES)}.')
    if isinstance(values, str):
        values = parse_values(values)
    values = list(values)
    if len(values) < 2:
        raise configuration_lib.ConfigurationError('A sweep needs at least two values.')

    key = SWEEP_AXES[axis]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    # Check every point before running any of them
    scenarios = []
    for value in values:
        conf = dict(simulator.conf)
        conf[key] = value
        scenarios.append(configuration_lib.check_conf(conf))

    rows = []
    for index, (value, scenario) in enumerate(zip(values, scenarios)):
        point_dir = out_dir / f'point_{index:03d}'
        rng = simulator.rng.derive(index + 1)
        try:
            result = link_lib.simulate(scenario, rng)
            report = report_lib.write_report(scenario, result, point_dir)
        except Exception as err:
            logger.warning(f'Sweep point {index} ({axis} = {value}) failed: {err}')
            rows.append((index, value, math.nan, math.nan, math.nan, math.nan, False, str(err) or type(err).__name__))
            continue
        rows.append((
            index,
            value,
            report.metrics.ber,
            report.metrics.evm_db,
            report.extinction_final,
            report.duty_cycle,
            report.converged,
            '',
        ))
        logger.info(f'Sweep point {index} ({axis} = {value}): BER {report.metrics.ber:.3e}.')
    report_lib.write_csv(out_dir / SWEEP_FILE, SWEEP_HEADER, rows)
    return rows
