#!/usr/bin/env python
"""
Main entry point for the universal decision laboratory.

Subcommands:
    validate    Check environment files or every environment an experiment references
    plan        One expectimax decision with an audit record
    predict     Bayes-optimal prediction runs of the mixture predictor
    experiment  Run a configured experiment and exit non-zero unless every verdict passes
"""

import argparse
from functools import partial
import logging
import os
import sys
import traceback
import uuid
from typing import Any, Dict, List

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pandas as pd
import yaml

import config
from core.errors import ConfigError, LaboratoryError
from core.history import HistoryTape
from core.mixture import MixtureModel
from core.numeric import format_number
from core.planner import select_action
from core.plugin_manager import PluginManager
from core.predictor import PredictorPolicy, run_prediction
from simulation.data_loader import ExperimentConfigLoader, parse_seed_list
from simulation.evaluation import ReportEvaluator
from simulation.experiments import map_seeds, run_experiment
from utils.csv_utils import write_table
from utils.json_utils import canonical_hash, save_json
from utils.logger import setup_logger

logger = None  # Will be initialized in main


def output_dir_for(args: argparse.Namespace, default: str) -> str:
    out = args.out or os.path.join(config.SIMULATION_CONFIG["results_dir"], default)
    os.makedirs(out, exist_ok=True)
    return out


def command_validate(args: argparse.Namespace, manager: PluginManager) -> bool:
    """
    Validate an environment file (one entry or an ``environments`` list) or an experiment config.

    Returns:
        True if every environment built and passed validation
    """
    with open(args.config, "r") as f:
        data = yaml.safe_load(f) or {}
    results: List[Dict[str, Any]] = []
    loader = ExperimentConfigLoader(manager)
    if "experiment" in data:
        cfg = loader.load(args.config, resolve=True)
        results.append({"name": cfg.source, "valid": True, "kind": cfg.kind})
    else:
        base = os.path.dirname(os.path.abspath(args.config))
        entries = data.get("environments", [data])
        for entry in entries:
            entry = loader.inline_entry(entry, base)
            name = entry.get("name", entry.get("kind", "?"))
            try:
                model = manager.build_environment(entry, validate=True)
                results.append({"name": name, "valid": True, **model.describe()})
            except LaboratoryError as e:
                logger.error(f"Environment {name} is invalid: {e}")
                results.append({"name": name, "valid": False, "error": f"{type(e).__name__}: {e}"})
    out = output_dir_for(args, "validate")
    path = os.path.join(out, "validation.json")
    save_json({"config": args.config, "kinds": manager.load_all_plugins(), "results": results}, path)
    valid = all(r["valid"] for r in results)
    logger.info(f"Validated {len(results)} entries: {'all valid' if valid else 'invalid entries found'} ({path})")
    return valid


def command_plan(args: argparse.Namespace, manager: PluginManager) -> bool:
    """Run select_action once on the configured model and history; write the audit JSON and CSV."""
    loader = ExperimentConfigLoader(manager)
    cfg = loader.load(args.config, output_dir=args.out)
    truth = cfg.build_truth(manager)
    if cfg.experiment.get("plan_with", "mixture") == "mixture" and cfg.model_class is not None:
        model = MixtureModel(cfg.build_class(manager))
    else:
        model = truth
    loss = None
    if cfg.planner.get("loss_source", "explicit") == "explicit":
        loss = cfg.build_loss(model.observation_alphabet.size, model.action_alphabet.size)
    planner = cfg.planner_config(loss)
    tape = HistoryTape.parse(args.history or "", model.action_alphabet, model.observation_alphabet, model.loss_alphabet)
    result = select_action(model, tape, planner)

    os.makedirs(cfg.output_dir, exist_ok=True)
    run_id = str(uuid.uuid4())
    audit = {
        "run_id": run_id,
        "config_hash": cfg.config_hash,
        "version": cfg.version,
        "model": model.name,
        "history": tape.serialize(),
        "cycle": tape.length + 1,
        "last_cycle": planner.last_cycle(tape.length + 1),
        **result.to_audit(),
    }
    save_json(audit, os.path.join(cfg.output_dir, "plan_audit.json"))
    frame = pd.DataFrame({
        "action": list(range(len(result.action_values))),
        "value": [format_number(v) for v in result.action_values],
        "chosen": [int(i == result.action.index) for i in range(len(result.action_values))],
    })
    meta = {"config_hash": cfg.config_hash, "version": cfg.version, "run_id": run_id}
    write_table(frame, os.path.join(cfg.output_dir, "plan_actions"), meta, args.format)
    print(f"Chosen action: {result.action.index}  value: {format_number(result.value)}")
    return True


def _prediction_frame(truth, model_class, loss, n: int, seed: int) -> pd.DataFrame:
    ledger = run_prediction(truth, PredictorPolicy(MixtureModel(model_class), loss), n, seed)
    return ledger.to_frame(model_class.names)


def command_predict(args: argparse.Namespace, manager: PluginManager) -> bool:
    """Run the mixture predictor against the configured truth on every seed."""
    loader = ExperimentConfigLoader(manager)
    cfg = loader.load(args.config, seeds=parse_seed_list(args.seed), output_dir=args.out)
    truth = cfg.build_truth(manager)
    model_class = cfg.build_class(manager)
    loss = cfg.build_loss(truth.observation_alphabet.size)
    frames = map_seeds(partial(_prediction_frame, truth, model_class, loss, cfg.cycles), cfg.seeds, args.workers, "predict", args.quiet)
    run_id = str(uuid.uuid4())
    meta = {"config_hash": cfg.config_hash, "version": cfg.version, "run_id": run_id}
    for seed, frame in zip(cfg.seeds, frames):
        write_table(frame, os.path.join(cfg.output_dir, f"predict_seed{seed}"), meta, args.format)
        logger.info(f"Seed {seed}: total loss {frame['cumulative_loss'].iloc[-1]:.6g} over {cfg.cycles} cycles")
    return True


def command_experiment(args: argparse.Namespace, manager: PluginManager) -> bool:
    """Run a configured experiment and print its report."""
    loader = ExperimentConfigLoader(manager)
    cfg = loader.load(args.config, seeds=parse_seed_list(args.seed), output_dir=args.out)
    report = run_experiment(cfg, manager, workers=args.workers, fmt=args.format, quiet=args.quiet)
    print(ReportEvaluator().render(report))
    return report.passed


COMMANDS = {
    "validate": command_validate,
    "plan": command_plan,
    "predict": command_predict,
    "experiment": command_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Universal Decision Laboratory")
    parser.add_argument("command", choices=sorted(COMMANDS), help="What to run")
    parser.add_argument("--config", type=str, required=True, help="Path to an environment or experiment YAML file")
    parser.add_argument("--seed", type=str, help="Seeds overriding the config, e.g. 1,2,3 or 0-99")
    parser.add_argument("--out", type=str, help="Output directory")
    parser.add_argument("--format", choices=["csv", "gnuplot"], default=config.SIMULATION_CONFIG["format"], help="Table format")
    parser.add_argument("--workers", type=int, default=config.SIMULATION_CONFIG["workers"], help="Processes across seeds")
    parser.add_argument("--history", type=str, help='History for plan, as "y:x y:x ..."')
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="No progress bars; only warnings on the console")
    return parser


def main(argv=None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)

    # Setup logging
    global logger
    log_dir = config.SIMULATION_CONFIG.get("log_dir", "logs")
    level = "DEBUG" if args.verbose else config.LOGGING_CONFIG["level"]
    setup_logger(
        name=config.LOGGING_CONFIG["name"],
        log_file=os.path.join(log_dir, config.LOGGING_CONFIG["log_file"]),
        level=level,
        format_str=config.LOGGING_CONFIG["format"],
        console_level="WARNING" if args.quiet else None,
    )
    logger = logging.getLogger("main")

    manager = PluginManager(validation_depth=config.EXPERIMENT_CONFIG["validation_depth"])
    try:
        ok = COMMANDS[args.command](args, manager)
    except Exception as e:
        logger.exception(f"{args.command} failed for {args.config}: {str(e)}")
        print(f"ERROR: {args.command} failed for {args.config}: {str(e)}")

        # Create an error record
        error_result = {
            "run_id": str(uuid.uuid4()),
            "command": args.command,
            "config": args.config,
            "config_hash": _safe_hash(args.config),
            "version": config.ARTIFACT_VERSION,
            "error": True,
            "error_type": type(e).__name__,
            "error_message": str(e),
            "error_traceback": traceback.format_exc(),
        }
        out = output_dir_for(args, args.command)
        path = os.path.join(out, "error.json")
        save_json(error_result, path)
        logger.info(f"Saved error record to {path}")
        return 2 if isinstance(e, ConfigError) else 1
    return 0 if ok else 1


def _safe_hash(path: str) -> str:
    try:
        with open(path, "r") as f:
            return canonical_hash(yaml.safe_load(f))
    except Exception:
        return ""


if __name__ == "__main__":
    sys.exit(main())
