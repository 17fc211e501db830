"""
PMC-SH link simulator command line

Usage:
    pmcsh run [--config PATH] [--preset NAME] [--seed N] [--out DIR]
    pmcsh sweep --axis {osnr,baud,drift_rate,length} --values a,b,c
                [--config PATH] [--preset NAME] [--seed N] [--out DIR]
    pmcsh print-defaults [--config PATH] [--preset NAME]

The output directory is `--out`, else the PMCSH_OUT environment variable, else `pmcsh_out`.
"""
import argparse
import logging
import os
import sys

from .conf import DEFAULT_PRESET, PRESETS
from .lib import configuration as configuration_lib
from .lib.scenario import SWEEP_AXES
from .simulator import LinkSimulator, SimulationError

logger = logging.getLogger(__name__)

OUT_ENV = 'PMCSH_OUT'
DEFAULT_OUT = 'pmcsh_out'

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Bad arguments are configuration errors, not a SystemExit from argparse
    def error(self, message):
        raise ArgumentError(message)


def build_parser():
    parser = _Parser(prog='pmcsh', description='PMC-SH self-homodyne coherent link simulator.')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    def add_conf_args(sub):
        sub.add_argument('--config', help='Configuration file (key = value text or JSON).')
        sub.add_argument(
            '--preset', choices=sorted(PRESETS),
            help=f'Preset applied under the configuration file (default: {DEFAULT_PRESET}).')

    def add_run_args(sub):
        add_conf_args(sub)
        sub.add_argument('--seed', type=int, help='Override of run.seed.')
        sub.add_argument('--out', help=f'Output directory (default: ${OUT_ENV} or "{DEFAULT_OUT}").')

    add_run_args(commands.add_parser('run', help='Run one scenario.'))
    sweep = commands.add_parser('sweep', help='Run one scenario per value of a parameter.')
    add_run_args(sweep)
    sweep.add_argument('--axis', required=True, choices=sorted(SWEEP_AXES), help='Swept parameter.')
    sweep.add_argument('--values', required=True, help='Comma separated values.')
    add_conf_args(commands.add_parser('print-defaults', help='Print the merged configuration.'))
    return parser


def output_dir(args):
    return args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT


def make_simulator(args, setup_logging=True):
    simulator = LinkSimulator(args.config, preset=args.preset or DEFAULT_PRESET, setup_logging=setup_logging)
    if getattr(args, 'seed', None) is not None:
        simulator.update_conf('run.seed', args.seed)
    return simulator


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == 'print-defaults':
            simulator = make_simulator(args, setup_logging=False)
            print(configuration_lib.format_conf(simulator.conf), end='')
            return EXIT_OK
        simulator = make_simulator(args)
        out_dir = output_dir(args)
        if args.command == 'run':
            report = simulator.run_scenario(out_dir)
            print(f'BER {report.metrics.ber:.6e}, extinction {report.extinction_final:.2f} dB, results in {out_dir}')
        else:
            rows = simulator.sweep(args.axis, args.values, out_dir)
            failed = sum(1 for row in rows if row[-1])
            print(f'{len(rows)} points, {failed} failed, results in {out_dir}')
    except (ArgumentError, configuration_lib.ConfigurationError) as err:
        print(f'Configuration error: {err}', file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as err:
        print(f'Simulation error: {err}', file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, ArithmeticError, OSError) as err:
        logger.error(f'Run failed: {err}')
        print(f'Error: {err}', file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
