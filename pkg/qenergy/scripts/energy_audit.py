'''Audit the energy of quantum states through branching and collapse.

Subcommands:

  toy       closed system/environment branching model, branch energies
  spin      two-spin dipole protocol: trajectory, probe measurement, energy
            shift of the stationary spin
  sweep     late-time entanglement and energy shift over a (b, v) grid
  validate  run the acceptance suite, print a pass/fail table

Results are written as CSV with `#` provenance lines, to stdout or --output.
'''
import argparse
import logging
import sys

from utlz import first_paragraph

from qenergy.config import load_config_file, merge_config
from qenergy.models.spin_protocol import PROPAGATORS
from qenergy.output import render
from qenergy.utils.errors import ConfigError, ContractError, QEnergyError
from qenergy.utils.logger import VERBOSE, init_logger, setup_logging, logger
from qenergy.validation import report_lines, run_criteria
from qenergy._version import __version__

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def add_common_arguments(parser):
    parser.add_argument('--config',
                        metavar='<path>',
                        help='JSON file with the same keys as the flags; '
                             'flags override file values')
    parser.add_argument('--output',
                        metavar='<path>',
                        help='write CSV to <path> instead of stdout')
    parser.add_argument('--seed',
                        type=int,
                        metavar='<int>',
                        help='64-bit seed of the collapse draw (default: 0)')
    meg = parser.add_mutually_exclusive_group()
    meg.add_argument('--short',
                     dest='loglevel',
                     action='store_const',
                     const=logging.INFO,
                     default=VERBOSE,  # default loglevel if nothing set
                     help='show short results and warnings/errors only')
    meg.add_argument('--debug',
                     dest='loglevel',
                     action='store_const',
                     const=logging.DEBUG,
                     help='show more for diagnostic purposes')


def add_toy_arguments(parser):
    for name, what in (('alpha-re', 'real part of alpha'),
                       ('alpha-im', 'imaginary part of alpha'),
                       ('beta-re', 'real part of beta'),
                       ('beta-im', 'imaginary part of beta'),
                       ('e1', 'energy E1 of |1>_s'),
                       ('e2', 'energy E2 of |2>_s'),
                       ('lambda', 'coupling lambda > 0'),
                       ('t-max', 'last sample time')):
        parser.add_argument('--' + name, type=float, metavar='<float>',
                            help=what)
    parser.add_argument('--t-steps', type=int, metavar='<int>',
                        help='number of sample intervals on [0, t-max]')


def add_spin_arguments(parser):
    for name, what in (('g', 'dipole coupling g'),
                       ('b', 'impact parameter b'),
                       ('v', 'probe velocity v, fraction of c'),
                       ('omega', 'Larmor frequency of particle 1'),
                       ('phi0', 'initial phase of particle 1'),
                       ('t0', 'window start (default: -200 b/v)'),
                       ('tf', 'window end and measurement time '
                              '(default: 200 b/v)')):
        parser.add_argument('--' + name, type=float, metavar='<float>',
                            help=what)
    parser.add_argument('--t-steps', type=int, metavar='<int>',
                        help='number of trajectory intervals')
    parser.add_argument('--propagator', choices=PROPAGATORS,
                        help='magnus1 (closed form) or ordered (time-ordered '
                             'midpoint product)')
    parser.add_argument('--steps', type=int, metavar='<int>',
                        help='steps of the ordered propagator')


def add_sweep_arguments(parser):
    for name, what in (('g', 'dipole coupling g'),
                       ('omega', 'Larmor frequency of particle 1'),
                       ('phi0', 'initial phase of particle 1'),
                       ('b-min', 'smallest impact parameter'),
                       ('b-max', 'largest impact parameter'),
                       ('v-min', 'smallest velocity'),
                       ('v-max', 'largest velocity')):
        parser.add_argument('--' + name, type=float, metavar='<float>',
                            help=what)
    for name, what in (('b-num', 'number of impact parameters'),
                       ('v-num', 'number of velocities'),
                       ('workers', 'worker processes (default: 1)')):
        parser.add_argument('--' + name, type=int, metavar='<int>',
                            help=what)
    parser.add_argument('--spacing', choices=('linear', 'log'),
                        help='grid spacing (default: linear)')


def create_parser():
    parser = argparse.ArgumentParser(description=first_paragraph(__doc__))
    parser.add_argument('-v', '--version',
                        action='version',
                        default=False,
                        version=__version__,
                        help='print version number')
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    toy = subparsers.add_parser('toy', help='branching toy model')
    add_common_arguments(toy)
    add_toy_arguments(toy)

    spin = subparsers.add_parser('spin', help='two-spin protocol')
    add_common_arguments(spin)
    add_spin_arguments(spin)

    sweep = subparsers.add_parser('sweep', help='(b, v) parameter sweep')
    add_common_arguments(sweep)
    add_sweep_arguments(sweep)

    validate = subparsers.add_parser('validate', help='acceptance suite')
    add_common_arguments(validate)
    validate.add_argument('--filter',
                          metavar='<text>',
                          help='run only criteria whose name contains <text>')
    return parser


NON_PARAM_ARGS = ('subcommand', 'config', 'loglevel', 'version')


def flag_values(args):
    '''Flags given on the command line, keyed like the config file.'''
    return {key: val for key, val in vars(args).items()
            if key not in NON_PARAM_ARGS}


def write_output(text, path):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
        logger.verbose(f'wrote {path}')


def run_validate(cfg):
    results = run_criteria(cfg.filter)
    if not results:
        raise ConfigError(f'no criterion matches filter {cfg.filter!r}')
    write_output('\n'.join(report_lines(results)) + '\n', cfg.output)
    failed = [res.criterion.name for res in results if not res.passed]
    for name in failed:
        logger.error(f'criterion failed: {name}')
    return EXIT_FAILED if failed else EXIT_OK


def run(args):
    '''Resolve the config and dispatch; returns the process exit code.'''
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = merge_config(args.subcommand, file_values, flag_values(args))
        if cfg.subcommand == 'validate':
            return run_validate(cfg)
        write_output(render(cfg), cfg.output)
    except (ConfigError, ContractError) as exc:
        logger.error(f'configuration error: {exc}')
        return EXIT_CONFIG
    except QEnergyError as exc:
        logger.error(f'{type(exc).__name__}: {exc}')
        return EXIT_FAILED
    return EXIT_OK


def main(argv=None):
    init_logger()
    parser = create_parser()
    args = parser.parse_args(argv)
    # keep stdout for CSV when no --output is given
    info_stream = sys.stderr if args.output is None else sys.stdout
    setup_logging(args.loglevel, info_stream)
    logger.debug(args)
    return run(args)


if __name__ == '__main__':
    sys.exit(main())
