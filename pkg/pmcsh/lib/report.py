"""
PMC-SH simulator report library
CSV and JSON artifacts of a scenario run. Numbers are written with 17 significant digits and '\n' line
ends so that equal runs give identical bytes.
This module is not intended to be used directly, only the simulator class should be used.
"""
from dataclasses import dataclass
from pathlib import Path
import csv
import json
import logging
import math
import shutil
import tempfile

import numpy as np

logger = logging.getLogger(__name__)

NUMBER_FORMAT = '.17g'

CONSTELLATION_FILE = 'constellation.csv'
SPECTRA_FILE = 'spectra.csv'
TRACE_FILE = 'ctl_trace.csv'
REPORT_FILE = 'report.json'


@dataclass(frozen=True)
class LinkReport:
    metrics: object
    metrics_bypass: object
    extinction_final: float
    iterations: int
    converged: bool
    duty_cycle: float
    files: tuple = ()


def format_number(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), NUMBER_FORMAT)


def json_value(value):
    # NaN and infinities are not JSON
    if isinstance(value, dict):
        return {key: json_value(val) for key, val in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [json_value(val) for val in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_csv(path, header, rows):
    with open(path, 'w', newline='') as fo:
        writer = csv.writer(fo, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([val if isinstance(val, str) else format_number(val) for val in row])


def write_json(path, data):
    content = json.dumps(json_value(data), sort_keys=True, indent=4, allow_nan=False)
    with open(path, 'w', newline='') as fo:
        fo.write(content + '\n')


def constellation_rows(result):
    n_pre = result.frame.preamble.size
    pre = result.symbols_bypass[n_pre:]
    post = result.symbols_equalized[n_pre:] if result.symbols_equalized is not None else None
    for index, symbol in enumerate(pre):
        if post is None:
            yield (index, symbol.real, symbol.imag, None, None)
        else:
            yield (index, symbol.real, symbol.imag, post[index].real, post[index].imag)


def spectra_rows(result):
    before, after = result.spectra_before, result.spectra_after
    for index, freq in enumerate(before.freqs):
        yield (freq, before.psd_x[index], before.psd_y[index], after.psd_x[index], after.psd_y[index])


def trace_rows(trace):
    for index in range(trace.iterations):
        yield (
            index,
            trace.time_s[index],
            trace.monitor_mw[index],
            trace.extinction_db[index],
            *trace.retardances[index],
        )


def report_data(scenario, result, files):
    trace = result.trace
    return {
        'seed': scenario.seed,
        'format': scenario.tx.format,
        'baud': scenario.tx.baud,
        'control': scenario.control,
        'bypass_dsp': scenario.bypass_dsp,
        'metrics': result.metrics.as_dict(),
        'metrics_bypass': result.metrics_bypass.as_dict(),
        'extinction_final_db': result.extinction_final,
        'carrier_fraction_final': result.carrier_fraction_final,
        'controller': {
            'iterations': trace.iterations,
            'converged': trace.converged,
            'converged_at': trace.converged_at,
            'diverged': trace.diverged,
            'duty_cycle': trace.duty_cycle(),
            'final_retardances': trace.final_state.retardances,
        },
        'spectra_before': result.spectra_before.summary(),
        'spectra_after': result.spectra_after.summary(),
        'dgd_ps': result.dgd_ps,
        'stokes_received': result.stokes_received,
        'files': list(files),
    }


def write_report(scenario, result, out_dir):
    """
    Writes the artifacts of a run in `out_dir`, replacing it atomically.
    Nothing is left behind if any write fails.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp_dir = Path(tempfile.mkdtemp(prefix=f'.{out_dir.name}.', dir=out_dir.parent))
    files = (CONSTELLATION_FILE, SPECTRA_FILE, TRACE_FILE, REPORT_FILE)
    try:
        header = ('symbol', 'pre_i', 'pre_q', 'post_i', 'post_q')
        write_csv(tmp_dir / CONSTELLATION_FILE, header, constellation_rows(result))
        write_csv(
            tmp_dir / SPECTRA_FILE,
            ('freq_hz', 'psd_x_before', 'psd_y_before', 'psd_x_after', 'psd_y_after'),
            spectra_rows(result))
        n_plates = result.trace.retardances.shape[1]
        write_csv(
            tmp_dir / TRACE_FILE,
            ('iter', 'time_s', 'monitor_mw', 'ext_db', *(f'phi{index + 1}' for index in range(n_plates))),
            trace_rows(result.trace))
        write_json(tmp_dir / REPORT_FILE, report_data(scenario, result, files))
        if out_dir.exists():
            shutil.rmtree(out_dir)
        tmp_dir.rename(out_dir)
    except Exception:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise
    logger.info(f'Report written in "{out_dir}".')
    return LinkReport(
        metrics=result.metrics,
        metrics_bypass=result.metrics_bypass,
        extinction_final=result.extinction_final,
        iterations=result.trace.iterations,
        converged=result.trace.converged,
        duty_cycle=result.trace.duty_cycle(),
        files=tuple(out_dir / name for name in files),
    )
