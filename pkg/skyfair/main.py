"""
Command-line entry point.

    skyfair simulate --preset desk --seed 1 --arms traditional,saq
    skyfair place --preset desk --method all --stride 1
    skyfair qtable inspect results/saq.qtable

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 I/O or Q-table file error.
"""
import argparse
import subprocess
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import structlog

from skyfair import __version__
from skyfair.core.config import config_snapshot, resolve_config, settings, validate_settings
from skyfair.core.errors import ConfigurationError, QTableIncompatibleError, QTableParseError
from skyfair.core.log_setup import configure_logging
from skyfair.models.learning import CandidateEvaluation, Lattice
from skyfair.models.metrics import RunManifest
from skyfair.models.scenario import ARMS, PLACE_METHODS
from skyfair.services.baselines import exhaustive_search, pso_search
from skyfair.services.mobility import TrajectoryRecorder, initial_state
from skyfair.services.objective import PlacementObjective
from skyfair.services.qplace import QPlacer, inspect_qtable, load_qtable, save_qtable
from skyfair.services.scenario import generate_scenario, with_users
from skyfair.services.simkit import Experiment
from skyfair.utils.file_handler import file_digest, get_file_handler
from skyfair.utils.seeding import SeedStreams

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3

PLACE_HEADER = "method,x_m,y_m,h_m,theta,feasible"

# Options naming files or the one-shot method; the manifest records the paths itself
INVOCATION_OPTIONS = ("out_dir", "qtable_in", "qtable_out", "snapshot", "method")
SIMULATE_FLAGS = ("seed", "arms", "duration_s", "out_dir", "qtable_in", "qtable_out")
PLACE_FLAGS = ("seed", "stride", "i_know_this_is_huge", "method", "snapshot")


def version_string() -> str:
    """git describe when run from a checkout, the package version otherwise"""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    described = result.stdout.strip()
    return described if result.returncode == 0 and described else __version__


def _overrides(args: argparse.Namespace, keys: Sequence[str]) -> Dict[str, Any]:
    return {key: getattr(args, key, None) for key in keys}


def cmd_simulate(args: argparse.Namespace) -> int:
    flags = _overrides(args, SIMULATE_FLAGS)
    if args.manifest:
        manifest = get_file_handler().read_manifest(args.manifest)
        replay = {
            **manifest.config,
            **manifest.options,
            "seed": manifest.seed,
            "out_dir": manifest.output_dir,
            "qtable_in": manifest.qtable_in,
        }
        replay.update({k: v for k, v in flags.items() if v is not None})
        config, options = resolve_config(overrides=replay)
    else:
        config, options = resolve_config(preset=args.preset, config_path=args.config, overrides=flags)
    if options.qtable_out and "saq" not in options.arms:
        raise ConfigurationError("requires the saq arm", field="qtable_out")

    lattice = Lattice.from_config(config)
    table_in = load_qtable(options.qtable_in, lattice) if options.qtable_in else None
    recorder = TrajectoryRecorder() if options.write_trajectory else None
    handler = get_file_handler(options.out_dir)

    logger.info("simulation_started", seed=config.seed, arms=options.arms, duration_s=options.duration_s)
    experiment = Experiment(config, options, streams=SeedStreams(config.seed), table_in=table_in, recorder=recorder)
    log = experiment.run()

    written = [handler.write_timeseries(log), handler.write_sinr_cdf(log)]
    if log.convergence:
        written.append(handler.write_convergence(log))
    if options.write_positions:
        aerial = {arm: placement.position for arm, placement in experiment.placements.items()}
        users = [(float(x), float(y)) for x, y in experiment.state.positions]
        written.append(handler.write_positions(experiment.scenario, users, aerial))
    if recorder is not None:
        written.append(handler.write_trajectory(recorder.rows))
    if options.qtable_out:
        written.append(save_qtable(experiment.placers["saq"].table, options.qtable_out))

    manifest = RunManifest(
        subcommand="simulate",
        seed=config.seed,
        version=version_string(),
        output_dir=str(handler.output_dir),
        config=config_snapshot(config),
        options=options.model_dump(exclude=set(INVOCATION_OPTIONS)),
        qtable_in=options.qtable_in,
        qtable_out=options.qtable_out,
        artifacts={path.name: file_digest(path) for path in written},
    )
    written.append(handler.write_manifest(manifest))
    for path in written:
        print(path)
    return EXIT_OK


def _format_place(candidate: CandidateEvaluation) -> str:
    x, y, h = candidate.position
    return f"{candidate.method},{x!r},{y!r},{h!r},{candidate.theta!r},{str(candidate.feasible).lower()}"


def cmd_place(args: argparse.Namespace) -> int:
    config, options = resolve_config(
        preset=args.preset,
        config_path=args.config,
        overrides=_overrides(args, PLACE_FLAGS),
    )
    streams = SeedStreams(config.seed)
    scenario = generate_scenario(config, streams.rng("scenario"))
    if options.snapshot:
        scenario = with_users(scenario, get_file_handler().read_snapshot(options.snapshot))
    positions = np.asarray(scenario.user_positions, dtype=float).reshape(-1, 2)
    objective = PlacementObjective(scenario, positions)

    methods: List[str] = ["exhaustive", "pso", "saq"] if options.method == "all" else [options.method]
    results: List[CandidateEvaluation] = []
    for method in methods:
        if method == "exhaustive":
            results.append(
                exhaustive_search(
                    scenario,
                    positions,
                    stride=options.stride,
                    i_know_this_is_huge=options.i_know_this_is_huge,
                    objective=objective,
                )
            )
        elif method == "pso":
            results.append(pso_search(scenario, positions, streams.rng("pso"), options=options, objective=objective))
        else:
            policy = "metropolis" if method == "saq" else "epsilon_greedy"
            state = initial_state(scenario, streams.rng("mobility"))
            outcome = QPlacer(scenario, policy=policy).place(
                scenario, state, streams.rng(f"learning:{method}"), objective=objective
            )
            results.append(objective.candidate(method, outcome.best_score))

    print(PLACE_HEADER)
    for candidate in results:
        print(_format_place(candidate))
    return EXIT_OK


def cmd_qtable_inspect(args: argparse.Namespace) -> int:
    summary = inspect_qtable(args.path)
    lattice = summary.lattice
    print(summary.header)
    print(f"lattice {lattice.nx}x{lattice.ny}x{lattice.nz} pitch {lattice.upsilon!r}")
    print(f"rows {summary.rows}")
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", default=None, help=f"Base preset (default {settings.DEFAULT_PRESET})")
    parser.add_argument("--config", default=None, help="key = value config file layered over the preset")
    parser.add_argument("--seed", type=int, default=None, help="Master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skyfair", description="Aerial base station placement simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Override SKYFAIR_LOG_LEVEL")
    parser.add_argument("--log-json", action="store_true", help="Emit JSON log lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run the move-place-measure experiment")
    _add_config_flags(simulate)
    simulate.add_argument("--arms", default=None, help=f"Comma-separated subset of {','.join(ARMS)}")
    simulate.add_argument("--duration-s", dest="duration_s", type=float, default=None)
    simulate.add_argument("--out-dir", dest="out_dir", default=None, help="Directory for CSVs and the manifest")
    simulate.add_argument("--qtable-in", dest="qtable_in", default=None, help="Warm-start the saq arm from this table")
    simulate.add_argument("--qtable-out", dest="qtable_out", default=None, help="Save the saq table here")
    simulate.add_argument("--manifest", default=None, help="Re-run from a manifest.json")
    simulate.set_defaults(handler=cmd_simulate)

    place = sub.add_parser("place", help="One-shot placement on a frozen user snapshot")
    _add_config_flags(place)
    place.add_argument("--method", choices=PLACE_METHODS, default=None, help="Optimizer to run (default exhaustive)")
    place.add_argument("--stride", type=int, default=None, help="Exhaustive search stride in cells")
    place.add_argument(
        "--i-know-this-is-huge",
        dest="i_know_this_is_huge",
        action="store_true",
        default=None,
        help="Allow exhaustive searches above SKYFAIR_EXHAUSTIVE_MAX_CANDIDATES",
    )
    place.add_argument("--snapshot", default=None, help="positions.csv whose users replace the generated ones")
    place.set_defaults(handler=cmd_place)

    qtable = sub.add_parser("qtable", help="Q-table file utilities")
    qtable_sub = qtable.add_subparsers(dest="qtable_command", required=True)
    inspect = qtable_sub.add_parser("inspect", help="Print header and row count")
    inspect.add_argument("path")
    inspect.set_defaults(handler=cmd_qtable_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        validate_settings()
        configure_logging(level=args.log_level, renderer="json" if args.log_json else None)
        return args.handler(args)
    except ConfigurationError as e:
        logger.error("configuration_error", field=e.field, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, QTableParseError, QTableIncompatibleError) as e:
        logger.error("io_error", error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:
        logger.exception("unexpected_error", error=str(e))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
