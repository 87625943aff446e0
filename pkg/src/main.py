"""
Main entry point: simulate, converge, groundstate and compare subcommands.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from src.exceptions import NumericalError
from src.harness import (COMPARE_HEADER, CONVERGENCE_HEADER, GROUND_STATE_HEADER, PRESETS, TRACE_HEADER,
                         Reference, RunConfig, apply_preset, compare, compare_rows, conservation_trace,
                         convergence_rows, convergence_study, ground_state_space_study, resolved_metadata,
                         run_ground_state, write_csv)
from src.utils.config import coerce_value, load_config, validate_config
from src.utils.logger import setup_logger

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

FLAG_KEYS = (
    'scheme',
    'n',
    'domain_half_length',
    'tau',
    't_end',
    'nonlinearity',
    'potential',
    'ic',
    'ec',
    'bootstrap',
    'gs_r_mode',
    'gs_beta',
    'gs_tol',
    'gs_ec',
    'out',
    'seed',
    'workers',
    'reference',
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="key = value configuration file")
    common.add_argument('--preset', help=f"experiment preset ({', '.join(sorted(PRESETS))})")
    common.add_argument('--full-length', action='store_true', help="use the long final time of the preset")
    common.add_argument('--scheme', help="sav1 | sav2 | lie | strang")
    common.add_argument('--n', help="number of grid points (even)")
    common.add_argument('--domain-half-length', help="L of the domain [-L, L)")
    common.add_argument('--tau', help="time step")
    common.add_argument('--t-end', help="final time")
    common.add_argument('--nonlinearity', help="none | cubic:beta | power:beta:gamma")
    common.add_argument('--potential', help="none | harmonic | const:V0 | file:PATH")
    common.add_argument('--ic', help="soliton:a:beta:v | solitary | sine | plane:A:k | halpha:alpha[:seed] "
                                     "| gaussian | file:PATH")
    common.add_argument('--ec', help="energy shift E_c")
    common.add_argument('--bootstrap', help="predictor | frozen")
    common.add_argument('--gs-r-mode', help="reset | carry")
    common.add_argument('--gs-beta', help="ground-state interaction strength")
    common.add_argument('--gs-tol', help="ground-state stopping tolerance")
    common.add_argument('--gs-ec', help="energy shift E_c of the ground-state flow")
    common.add_argument('--seed', help="seed for halpha data given without one")
    common.add_argument('--workers', help="concurrent runs in studies")
    common.add_argument('--reference', help="exact | self")
    common.add_argument('--out', help="output CSV path, - for stdout")
    common.add_argument('--log-level', help="DEBUG | INFO | WARNING | ERROR")

    parser = argparse.ArgumentParser(prog='savnls', description="SAV and splitting solvers for periodic NLS/GPE")
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('simulate', parents=[common], help="one run with a per-step conservation trace")
    converge = subparsers.add_parser('converge', parents=[common], help="convergence study in tau or N")
    converge.add_argument('--axis', choices=['tau', 'n'], help="parameter refined by the study")
    converge.add_argument('--values', help="comma separated tau or N values")
    groundstate = subparsers.add_parser('groundstate', parents=[common], help="ground state by gradient flow")
    groundstate.add_argument('--gs-space-study', action='store_true', help="spatial self-convergence study")
    subparsers.add_parser('compare', parents=[common], help="same run with every scheme")
    return parser


def resolve_config(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Defaults, config file and environment, then the preset, then CLI flags.

    Raises:
        ValueError: For invalid values, naming the flag where possible
        KeyError: For unknown keys or presets
    """
    config = load_config(args.config)
    full_length = args.full_length or config['full_length']
    if args.preset:
        apply_preset(config, args.preset, full_length)
    for key in FLAG_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        try:
            config[key] = coerce_value(key, value)
        except ValueError as e:
            raise ValueError(f"--{key.replace('_', '-')}: {str(e)}") from e
    validate_config(config)
    return config


def _parse_values(text: str, axis: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ValueError(f"--values: {str(e)}") from e
    if axis == 'n':
        return [int(value) for value in values]
    return values


def run_simulate(config: Dict[str, Any]) -> None:
    rows, result = conservation_trace(RunConfig.from_config(config))
    has_exact = any(value is not None for value in result.trace_errors)
    metadata = resolved_metadata(config, reference=Reference.EXACT if has_exact else Reference.NONE,
                                 ec=result.problem.energy_shift, h_mod_drift_violations=result.drift_violations)
    logging.getLogger(__name__).info(f"Simulation finished in {result.runtime:.3f}s")
    write_csv(config['out'], TRACE_HEADER, rows, metadata)


def run_converge(config: Dict[str, Any], args: argparse.Namespace, preset_name: Optional[str]) -> None:
    preset = PRESETS.get(preset_name) if preset_name else None
    axis = args.axis or (preset.axis if preset and preset.axis else 'tau')
    if args.values:
        values = _parse_values(args.values, axis)
    elif preset and preset.axis == axis and preset.values:
        values = list(preset.values)
    elif axis == 'tau':
        values = [config['tau'] * 2.0 ** -j for j in range(5)]
    else:
        values = [config['n'] * 2 ** j for j in range(4)]
    rows, kind = convergence_study(RunConfig.from_config(config), axis, values, config['workers'])
    write_csv(config['out'], CONVERGENCE_HEADER, convergence_rows(rows),
              resolved_metadata(config, axis=axis, reference=kind))


def run_groundstate(config: Dict[str, Any], space_study: bool) -> None:
    if space_study:
        rows = ground_state_space_study(config, workers=config['workers'])
        write_csv(config['out'], CONVERGENCE_HEADER, convergence_rows(rows),
                  resolved_metadata(config, axis='h', reference='h=1/32'))
        return
    result, grid = run_ground_state(config)
    metadata = resolved_metadata(config, energy=result.energy, modified_energy=result.modified_energy,
                                 chemical_potential=result.chemical_potential, iterations=result.iterations,
                                 converged=result.converged, monotone=result.monotone)
    write_csv(config['out'], GROUND_STATE_HEADER, zip(grid.nodes, result.phi), metadata)


def run_compare(config: Dict[str, Any]) -> None:
    rows = compare(RunConfig.from_config(config), workers=config['workers'])
    write_csv(config['out'], COMPARE_HEADER, compare_rows(rows), resolved_metadata(config))


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run a subcommand.

    Returns:
        int: 0 on success, 2 on configuration errors, 3 on numerical failures
    """
    args = build_parser().parse_args(argv)
    try:
        setup_logger(args.log_level)
    except ValueError as e:
        print(f"--log-level: {str(e)}", file=sys.stderr)
        return EXIT_CONFIG
    logger = logging.getLogger(__name__)

    try:
        config = resolve_config(args)
    except (ValueError, KeyError, OSError) as e:
        logger.error(f"Configuration error: {str(e)}")
        return EXIT_CONFIG

    logger.info(f"Running {args.command} with scheme={config['scheme']}, n={config['n']}, tau={config['tau']}")
    try:
        if args.command == 'simulate':
            run_simulate(config)
        elif args.command == 'converge':
            run_converge(config, args, args.preset)
        elif args.command == 'groundstate':
            run_groundstate(config, args.gs_space_study or args.preset == 'groundstate-space')
        else:
            run_compare(config)
    except NumericalError as e:
        logger.error(f"Numerical failure: {str(e)}")
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError) as e:
        logger.error(f"Configuration error: {str(e)}")
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
