"""
xdio - cross-domain imitation from observation on planar arms.

This module is the command-line front end. Each subcommand runs one pipeline
stage (or all of them) through ``PipelineRunner``:
1. gen-demos: scripted expert demonstrations
2. train-positions: temporal position estimators
3. train-align: cross-domain state maps
4. transfer: expert demos mapped into the agent domain
5. train-bco: inverse model and behavioral cloning
6. eval: normalized score against expert/random references
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

import logfire
from pydantic import ValidationError

# Configure logging and monitoring
logfire.configure(send_to_logfire="if-token-present", console=False)
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Local imports
from baselines import SWEEP_KINDS
from config import RunConfig, add_config_arguments
from pipeline import BASELINE_NAMES, PipelineRunner

STAGE_COMMANDS = ('gen-demos', 'train-positions', 'train-align', 'transfer', 'train-bco', 'eval')
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description='Cross-domain imitation from observation: align expert and agent arms, then clone.'
    )
    parser.add_argument(
        '--log-level',
        type=str,
        default='INFO',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='Root logging level'
    )
    commands = parser.add_subparsers(dest='command', required=True)

    for name in STAGE_COMMANDS:
        add_config_arguments(commands.add_parser(name, help=f"run the {name} stage"))

    run_all = commands.add_parser('run-all', help='run every stage into a fresh output directory')
    add_config_arguments(run_all)
    run_all.add_argument('--ablation', action='store_true', help='also run the ablation table')
    run_all.add_argument(
        '--baseline',
        dest='baselines',
        action='append',
        default=[],
        choices=BASELINE_NAMES,
        help='comparison method to add (repeatable)'
    )

    sweep = commands.add_parser('sweep', help='normalized score versus demo count or proxy-task count')
    add_config_arguments(sweep)
    sweep.add_argument('--kind', required=True, choices=SWEEP_KINDS)
    sweep.add_argument('--values', required=True, type=_int_list, help='e.g. 8,16,32,64')

    return parser.parse_args(argv)


def run_command(runner: PipelineRunner, args: argparse.Namespace):
    dispatch = {
        'gen-demos': runner.cmd_gen_demos,
        'train-positions': runner.cmd_train_positions,
        'train-align': runner.cmd_train_align,
        'transfer': runner.cmd_transfer,
        'train-bco': runner.cmd_train_bco,
        'eval': runner.cmd_eval,
    }
    if args.command == 'run-all':
        return runner.cmd_run_all(ablation=args.ablation, baselines=args.baselines)
    if args.command == 'sweep':
        return runner.cmd_sweep(args.kind, args.values)
    return dispatch[args.command]()


def error_line(stage: Optional[str], error: BaseException) -> str:
    """One machine-parsable line: ``error stage=<stage> type=<Class> message=<json>``."""
    return f"error stage={stage or 'config'} type={type(error).__name__} message={json.dumps(str(error))}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point. Returns the process exit code."""
    args = parse_arguments(argv)
    logging.getLogger().setLevel(args.log_level)

    try:
        config = RunConfig.from_args(args)
    except (ValidationError, ValueError, OSError) as e:
        print(error_line(None, e), file=sys.stderr)
        return EXIT_USAGE

    runner: Optional[PipelineRunner] = None
    try:
        runner = PipelineRunner(config)
        run_command(runner, args)
    except KeyboardInterrupt:
        logger.info("Run interrupted by user")
        return EXIT_INTERRUPTED
    except Exception as e:
        stage = runner.current_stage if runner else None
        logger.error(f"Stage {stage} failed: {str(e)}")
        print(error_line(stage, e), file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
