"""
Command-line front end: baseline, train, evaluate, analyze and export-field.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from cylinder_afc.agent.sac import SacAgent
from cylinder_afc.control.training import (
    BaselineConvergenceError,
    RunConfig,
    evaluate,
    load_baseline,
    load_run_config,
    prepare_baseline,
    save_baseline,
    train,
    write_evaluation,
)
from cylinder_afc.solver.forces import EstimationError, measure_strouhal
from cylinder_afc.solver.snapshot import export_field, load_snapshot
from cylinder_afc.utils.analysis import aggregate_learning_curves, psd, spectral_suppression, summarize
from cylinder_afc.utils.config import ConfigurationError
from cylinder_afc.utils.parser import read_episodes, read_series, write_table
from cylinder_afc.utils.state_manager import RunStore, write_json

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration (TOML)")
    common.add_argument("--seed", type=int, default=None, help="Seed to train or evaluate")
    common.add_argument("--out", default=None, help="Output root directory (overrides [training] out_dir)")
    common.add_argument("--verbose", action="store_true", help="Enable debug logging")

    parser = argparse.ArgumentParser(
        prog="cylinder_afc", description="Learned jet flow control of a confined cylinder wake"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("baseline", parents=[common], help="Run the uncontrolled flow to periodic shedding")

    p = sub.add_parser("train", parents=[common], help="Train SAC agents from the baseline")
    p.add_argument("--layout", help="Sensor layout override: L1, L2:N or L3:theta")
    p.add_argument("--vanilla", action="store_true", help="Single-snapshot state without action history")

    p = sub.add_parser("evaluate", parents=[common], help="Deterministic rollout of a trained agent")
    p.add_argument("--checkpoint", help="Agent checkpoint directory (default: seed's latest)")
    p.add_argument("--null", action="store_true", help="Evaluate with jets held at zero")
    p.add_argument("--duration", type=float, default=None, help="Rollout length in time units")
    p.add_argument("--layout", help="Sensor layout override: L1, L2:N or L3:theta")
    p.add_argument("--vanilla", action="store_true", help="Single-snapshot state without action history")

    p = sub.add_parser("analyze", parents=[common], help="Spectra, statistics and learning curves")
    p.add_argument("--trace", help="Force trace CSV (t,cd,cl) to analyze")
    p.add_argument("--baseline-trace", help="Uncontrolled force trace CSV for spectral suppression")
    p.add_argument("--window", type=int, default=None, help="Trailing samples for statistics")
    p.add_argument("--cd-baseline", type=float, default=None, help="Uncontrolled mean C_D")
    p.add_argument("--episodes", nargs="*", default=None, help="episodes.csv files to aggregate")

    p = sub.add_parser("export-field", parents=[common], help="Convert a snapshot to a CSV field grid")
    p.add_argument("--snapshot", help="Snapshot file (default: the run's baseline snapshot)")
    p.add_argument("--output", help="Output CSV path")
    return parser


def _load_config(args) -> RunConfig:
    if not args.config:
        raise ConfigurationError(f"{args.command} requires --config")
    config = load_run_config(args.config)
    if getattr(args, "layout", None):
        config = config.with_layout(args.layout)
    if getattr(args, "vanilla", False):
        config = config.vanilla()
    return config


def _store(args, config: RunConfig) -> RunStore:
    return RunStore(args.out or config.training.out_dir, config.training.name)


def _baseline(store: RunStore, config: RunConfig):
    try:
        return load_baseline(store, config.flow, config.jets)
    except FileNotFoundError:
        logger.info("No stored baseline; preparing one")
        baseline = prepare_baseline(config.flow, config.jets, config.training.baseline_time)
        save_baseline(store, baseline, config.flow)
        return baseline


def cmd_baseline(args, config: RunConfig) -> int:
    store = _store(args, config)
    baseline = prepare_baseline(config.flow, config.jets, config.training.baseline_time)
    save_baseline(store, baseline, config.flow)
    logger.info(f"Baseline written to {store.baseline_dir}")
    return EXIT_OK


def cmd_train(args, config: RunConfig) -> int:
    store = _store(args, config)
    baseline = _baseline(store, config)
    seeds = [args.seed] if args.seed is not None else list(config.episode.seeds)
    for seed in seeds:
        train(config, baseline, seed, store)
    return EXIT_OK


def cmd_evaluate(args, config: RunConfig) -> int:
    store = _store(args, config)
    baseline = _baseline(store, config)
    seed = args.seed if args.seed is not None else config.episode.seeds[0]

    agent = None
    if not args.null:
        agent = SacAgent.load(args.checkpoint or store.checkpoint_dir(seed))
        if agent.obs_dim != config.obs_dim:
            raise ConfigurationError(
                f"Checkpoint expects {agent.obs_dim} inputs but the configured state has {config.obs_dim}"
            )

    evaluation = evaluate(config, baseline, agent, args.duration)
    directory = store.evaluation_dir(None if args.null else seed)
    summary = write_evaluation(directory, evaluation, config.flow)

    if not args.null:
        reference = evaluate(config, baseline, None, args.duration)
        n = min(len(reference.trace), len(evaluation.trace))
        dt = 1.0 / config.flow.time_scale
        try:
            summary["spectral_suppression"] = spectral_suppression(
                reference.trace.cl[:n], evaluation.trace.cl[:n], dt, baseline.strouhal
            )
        except EstimationError as e:
            logger.warning(f"Spectral suppression not computed: {e}")
        else:
            write_json(os.path.join(directory, "summary.json"), summary)
    logger.info(f"Evaluation written to {directory}")
    return EXIT_OK


def cmd_analyze(args, config: Optional[RunConfig]) -> int:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    results = {}

    if args.trace:
        frame = read_series(args.trace)
        window = args.window or len(frame)
        dt = float(frame["t"].iloc[1] - frame["t"].iloc[0])
        stats = summarize(frame, window, args.cd_baseline)
        results["summary"] = stats.to_dict()
        for name in ("cl", "cd"):
            spectrum = psd(frame[name].to_numpy()[-window:], dt)
            write_table(spectrum.to_frame(), os.path.join(out, f"psd_{name}.csv"))
            results[f"psd_{name}"] = spectrum.metadata

        if args.baseline_trace:
            base = read_series(args.baseline_trace)
            strouhal = measure_strouhal(base["cl"].to_numpy(), dt)
            results["strouhal_uncontrolled"] = strouhal
            results["spectral_suppression"] = spectral_suppression(
                base["cl"].to_numpy(), frame["cl"].to_numpy(), dt, strouhal
            )

    records = [read_episodes(p) for p in args.episodes] if args.episodes else []
    if not records and config is not None:
        store = RunStore(config.training.out_dir, config.training.name)
        records = [store.load_episodes(s) for s in store.list_seeds()]
    if records:
        curves = aggregate_learning_curves(records)
        write_table(curves.curves, os.path.join(out, "learning_curves.csv"))
        results["final_episodes"] = curves.final
        results["records"] = curves.n_records

    if not results:
        raise ConfigurationError("Nothing to analyze: give --trace, --episodes or a --config with trained seeds")
    write_json(os.path.join(out, "analysis.json"), results)
    logger.info(f"Analysis written to {out}")
    return EXIT_OK


def cmd_export_field(args, config: RunConfig) -> int:
    store = _store(args, config)
    snapshot = args.snapshot or store.snapshot_path
    field = load_snapshot(snapshot, config.flow, config.jets)
    output = args.output or os.path.join(os.path.dirname(os.path.abspath(snapshot)), "field.csv")
    export_field(field, config.flow, output)
    return EXIT_OK


COMMANDS = {
    "baseline": cmd_baseline,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
    "export-field": cmd_export_field,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run a subcommand.

    Returns:
        0 on success, 2 on usage or configuration errors, 1 on runtime errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    try:
        if args.config and not os.path.exists(args.config):
            raise FileNotFoundError(f"Config file not found: {args.config}")
        if args.command == "analyze":
            config = _load_config(args) if args.config else None
        else:
            config = _load_config(args)
    except (ConfigurationError, FileNotFoundError) as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](args, config)
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except BaselineConvergenceError as e:
        logger.error(f"Baseline failed: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
