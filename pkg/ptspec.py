#!/usr/bin/env python3
"""
ptspec - command-line front end.

    ptspec <task> --config <path> [--out DIR] [--cache DIR] [--epsilon V] [--no-cache] [--verbose]

Tasks: spectrum, classify, reality, sweep, doublewell-fit. The task named on
the command line must match the config's [task] section.

Exit codes: 0 success, 1 operational error, 2 a hypothesis of the requested
criterion does not hold.
"""

import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from spectra import __version__
from spectra.cache import EigenCache
from spectra.config import TASKS, load_config
from spectra.errors import ConfigError, SpectraError
from spectral_study import EXIT_HYPOTHESIS, EXIT_OK, EXIT_OPERATIONAL, SpectralStudy

# Load environment variables from .env file
load_dotenv()

DEFAULT_CACHE_DIRECTORY = '.ptspec_cache'

logger = logging.getLogger('ptspec')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ptspec',
        description='Spectra of J-symmetric perturbed operator families H(eps) = H0 + eps*H1',
    )
    parser.add_argument('task', choices=TASKS, help='Pipeline to run')
    parser.add_argument('--config', required=True, help='Run configuration (.cfg)')
    parser.add_argument('--out', help='Output directory (overrides [output] directory)')
    parser.add_argument('--cache', help='Eigen-decomposition cache directory')
    parser.add_argument('--no-cache', action='store_true', help='Disable the eigen-decomposition cache')
    parser.add_argument('--epsilon', type=float, help='Single eps value (overrides the config)')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--version', action='version', version=f'ptspec {__version__}')
    return parser


def configure_logging(verbose: bool) -> None:
    level_name = 'DEBUG' if verbose else os.getenv('PTSPEC_LOG_LEVEL', 'WARNING')
    level = getattr(logging, level_name.upper(), logging.WARNING)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def resolve_cache(args: argparse.Namespace, enabled: bool):
    """--cache beats PTSPEC_CACHE beats the default; --no-cache or cache = false disables it."""
    if args.no_cache or not enabled:
        return None
    directory = args.cache or os.getenv('PTSPEC_CACHE') or DEFAULT_CACHE_DIRECTORY
    return EigenCache(directory)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    print("=" * 60)
    print(f"ptspec {__version__} - {args.task}")
    print("=" * 60)

    try:
        config = load_config(args.config)
        if config.task.name != args.task:
            raise ConfigError(None, f"config is for task '{config.task.name}', not '{args.task}'")
    except SpectraError as e:
        print(f"❌ {e}")
        return EXIT_OPERATIONAL

    if args.epsilon is not None:
        config.task.epsilons = [args.epsilon]
    if args.out:
        config.output.directory = args.out
    cache = resolve_cache(args, config.output.cache)

    print(f"📄 Config: {args.config} (sha256 {config.content_hash[:12]})")
    if cache is not None:
        print(f"🗄️  Cache: {cache.directory}")

    study = SpectralStudy(config, cache, progress_callback=lambda message, percent: print(f"   [{percent:3.0f}%] {message}"))
    report = study.run()
    written = study.write_outputs()

    print("")
    for verdict in report.verdicts:
        if 'verdict' in verdict:
            print(f"🔎 {verdict['verdict']} near lambda0 = {verdict['lambda0']:.10g}")
    if report.exit_code == EXIT_OK:
        print("✅ Done")
    elif report.exit_code == EXIT_HYPOTHESIS:
        print(f"⚠️  Hypothesis violated: {report.error['message']}")
    else:
        print(f"❌ {report.error['type']}: {report.error['message']}")
    for path in written:
        print(f"   → {path}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
