"""
Seeded experiment runners: mixture convergence, predictor regret and the
AIxi bandit. Seeds run independently (optionally in a process pool) and
are joined in seed order, so outputs do not depend on scheduling.
"""

from functools import partial
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import logging
import os
import sys
import uuid

import numpy as np
import pandas as pd
from tqdm import tqdm

from core.environment import EnvironmentModel
from core.errors import ConfigError
from core.history import HistoryTape
from core.loss import MatrixLoss
from core.mixture import MixtureModel, ModelClass
from core.planner import PlannerConfig, select_action
from core.plugin_manager import PluginManager
from core.predictor import PLACEHOLDER_ACTION, PredictorPolicy, run_prediction
from plugins.bandit_plugin import BernoulliBandit
from simulation.data_loader import ExperimentConfig
from simulation.evaluation import OUT_OF_ASSUMPTION, ExperimentReport, ReportEvaluator
from simulation.suites import KIND_SUITES, run_planner_suites
from utils.csv_utils import write_table

logger = logging.getLogger(__name__)


def map_seeds(fn: Callable[[int], Any], seeds: Sequence[int], workers: int = 1, desc: str = "seeds", quiet: bool = False) -> List[Any]:
    """
    Apply a per-seed function, in a process pool when workers > 1.

    Results come back in seed order either way.
    """
    disable = quiet or not sys.stderr.isatty()
    if workers > 1 and len(seeds) > 1:
        with Pool(processes=workers) as pool:
            return list(tqdm(pool.imap(fn, seeds), total=len(seeds), desc=desc, disable=disable))
    return [fn(seed) for seed in tqdm(seeds, desc=desc, disable=disable)]


def _meta(cfg: ExperimentConfig, run_id: str) -> Dict[str, str]:
    return {"config_hash": cfg.config_hash, "version": cfg.version, "run_id": run_id}


def _checkpoints(cfg: ExperimentConfig) -> List[int]:
    points = [c for c in cfg.checkpoints if c <= cfg.cycles]
    if not points:
        raise ConfigError(f"No checkpoint within {cfg.cycles} cycles")
    return points


def _report(cfg: ExperimentConfig, run_id: str) -> ExperimentReport:
    return ExperimentReport(kind=cfg.kind, config_hash=cfg.config_hash, version=cfg.version, run_id=run_id)


def _locate_truth(truth: EnvironmentModel, model_class: ModelClass, report: ExperimentReport) -> Optional[int]:
    index = model_class.index_of(truth)
    if index is None:
        logger.warning(f"Truth {truth.name} is not a member of the model class; results are {OUT_OF_ASSUMPTION}")
        report.labels.append(OUT_OF_ASSUMPTION)
    return index


def is_deterministic(model: EnvironmentModel) -> bool:
    """True when the first conditional row puts all mass on one percept (stationary sources)."""
    row = model.step_distribution((), (PLACEHOLDER_ACTION,))
    return model.context_length == 0 and any(p == 1 for p in row)


# ----------------------------------------------------------------------
# Convergence
# ----------------------------------------------------------------------

def convergence_seed(truth: EnvironmentModel, model_class: ModelClass, truth_index: Optional[int], n: int, seed: int) -> pd.DataFrame:
    """One seeded run of xi against the truth; per-cycle predictive error and truth weight."""
    rng = np.random.default_rng(seed)
    mixture = MixtureModel(model_class)
    percepts: Tuple = ()
    rows = []
    for t in range(1, n + 1):
        actions = (PLACEHOLDER_ACTION,) * t
        xi_row = mixture.step_distribution(percepts, actions)
        mu_row = truth.step_distribution(percepts, actions)
        x = truth.sample_next(percepts, actions, rng)
        j = truth.percept_index(x)
        mixture = mixture.advance(PLACEHOLDER_ACTION, x)
        percepts = percepts + (x,)
        weights = mixture.posterior_weights
        rows.append({
            "cycle": t,
            "percept": str(x),
            "xi_prob": float(xi_row[j]),
            "mu_prob": float(mu_row[j]),
            "abs_error": abs(float(xi_row[j]) - float(mu_row[j])),
            "truth_weight": float(weights[truth_index]) if truth_index is not None else float("nan"),
        })
    return pd.DataFrame(rows)


def run_convergence(cfg: ExperimentConfig, manager: PluginManager, workers: int = 1, fmt: str = "csv", quiet: bool = False) -> ExperimentReport:
    """
    Mixture convergence: |xi(x_t|h) - mu(x_t|h)| and the truth's posterior weight per cycle.

    Verdicts compare medians across seeds at the first and last checkpoint;
    the truth's median weight must also not fall between any two checkpoints.
    """
    run_id = str(uuid.uuid4())
    report = _report(cfg, run_id)
    truth = cfg.build_truth(manager)
    model_class = cfg.build_class(manager)
    truth_index = _locate_truth(truth, model_class, report)
    checkpoints = _checkpoints(cfg)

    frames = map_seeds(partial(convergence_seed, truth, model_class, truth_index, cfg.cycles), cfg.seeds, workers, "convergence", quiet)
    meta = _meta(cfg, run_id)
    for seed, frame in zip(cfg.seeds, frames):
        report.csv_paths.append(write_table(frame, os.path.join(cfg.output_dir, f"convergence_seed{seed}"), meta, fmt))

    evaluator = ReportEvaluator()
    errors = evaluator.checkpoint_table(frames, "abs_error", checkpoints)
    table = errors.rename(columns={"median": "median_abs_error", "mean": "mean_abs_error"})
    if truth_index is not None:
        weights = evaluator.checkpoint_table(frames, "truth_weight", checkpoints)
        table["median_truth_weight"] = weights["median"]
        table["mean_truth_weight"] = weights["mean"]
    report.csv_paths.append(write_table(table, os.path.join(cfg.output_dir, "convergence_summary"), meta, fmt))
    report.summary["checkpoints"] = {str(row["checkpoint"]): {k: v for k, v in row.items() if k != "checkpoint"} for row in table.to_dict("records")}

    if truth_index is None or len(checkpoints) < 2:
        report.verdicts["error_decreases"] = None
        report.verdicts["truth_weight_increases"] = None
        report.verdicts["truth_weight_floor"] = None
        report.verdicts["truth_weight_non_decreasing"] = None
        return report
    first, last = table.iloc[0], table.iloc[-1]
    medians = table["median_truth_weight"].tolist()
    floor = float(cfg.experiment.get("truth_weight_floor", 0.5))
    report.verdicts["error_decreases"] = bool(last["median_abs_error"] < first["median_abs_error"] or last["median_abs_error"] == 0)
    report.verdicts["truth_weight_increases"] = bool(last["median_truth_weight"] > first["median_truth_weight"] or last["median_truth_weight"] == 1)
    report.verdicts["truth_weight_floor"] = bool(last["median_truth_weight"] > floor)
    report.verdicts["truth_weight_non_decreasing"] = all(b >= a for a, b in zip(medians, medians[1:]))
    return report


# ----------------------------------------------------------------------
# Regret
# ----------------------------------------------------------------------

def regret_seed(truth: EnvironmentModel, model_class: ModelClass, loss: MatrixLoss, n: int, seed: int) -> Tuple[pd.DataFrame, int]:
    """Paired Lambda_mu / Lambda_xi ledgers on the same seeded percept stream, and the last cycle Lambda_xi lost."""
    ledger_mu = run_prediction(truth, PredictorPolicy(truth, loss), n, seed)
    ledger_xi = run_prediction(truth, PredictorPolicy(MixtureModel(model_class), loss), n, seed)
    frame_mu = ledger_mu.to_frame()
    frame_xi = ledger_xi.to_frame(model_class.names)
    frame = pd.DataFrame({
        "cycle": frame_mu["cycle"],
        "percept": frame_mu["percept"],
        "action_mu": frame_mu["action"],
        "action_xi": frame_xi["action"],
        "loss_mu": frame_mu["incurred_loss"],
        "loss_xi": frame_xi["incurred_loss"],
        "cumulative_mu": frame_mu["cumulative_loss"],
        "cumulative_xi": frame_xi["cumulative_loss"],
    })
    for column in frame_xi.columns:
        if column.startswith("w_"):
            frame[column] = frame_xi[column]
    return frame, ledger_xi.last_loss_cycle()


def run_regret(cfg: ExperimentConfig, manager: PluginManager, workers: int = 1, fmt: str = "csv", quiet: bool = False) -> ExperimentReport:
    """
    Regret of Lambda_xi against Lambda_mu with paired seeds.

    Ratios L_xi / L_mu are averaged over seeds with L_mu > 0; a deterministic
    truth additionally checks that Lambda_xi stops losing in the first half.
    """
    run_id = str(uuid.uuid4())
    report = _report(cfg, run_id)
    truth = cfg.build_truth(manager)
    model_class = cfg.build_class(manager)
    truth_index = _locate_truth(truth, model_class, report)
    loss = cfg.build_loss(truth.observation_alphabet.size)
    checkpoints = _checkpoints(cfg)

    outcomes = map_seeds(partial(regret_seed, truth, model_class, loss, cfg.cycles), cfg.seeds, workers, "regret", quiet)
    frames = [frame for frame, _ in outcomes]
    meta = _meta(cfg, run_id)
    for seed, frame in zip(cfg.seeds, frames):
        report.csv_paths.append(write_table(frame, os.path.join(cfg.output_dir, f"regret_seed{seed}"), meta, fmt))

    rows = []
    for c in checkpoints:
        l_mu = np.array([frame["cumulative_mu"].iloc[c - 1] for frame in frames])
        l_xi = np.array([frame["cumulative_xi"].iloc[c - 1] for frame in frames])
        defined = l_mu > 0
        ratios = l_xi[defined] / l_mu[defined]
        rows.append({
            "checkpoint": c,
            "mean_loss_mu": float(l_mu.mean()),
            "mean_loss_xi": float(l_xi.mean()),
            "mean_difference": float((l_xi - l_mu).mean()),
            "mean_ratio": float(ratios.mean()) if ratios.size else float("nan"),
            "ratio_seeds": int(defined.sum()),
        })
    table = pd.DataFrame(rows)
    report.csv_paths.append(write_table(table, os.path.join(cfg.output_dir, "regret_summary"), meta, fmt))
    report.summary["checkpoints"] = {str(r["checkpoint"]): {k: v for k, v in r.items() if k != "checkpoint"} for r in rows}

    if truth_index is None:
        report.verdicts["ratio_non_increasing"] = None
        report.verdicts["ratio_ceiling"] = None
        return report
    ratios = [r["mean_ratio"] for r in rows]
    if any(np.isnan(ratios)):
        report.verdicts["ratio_non_increasing"] = None
        report.verdicts["ratio_ceiling"] = None
    else:
        ceiling = float(cfg.experiment.get("regret_ceiling", 1.1))
        report.verdicts["ratio_non_increasing"] = all(b <= a for a, b in zip(ratios, ratios[1:]))
        report.verdicts["ratio_ceiling"] = bool(ratios[-1] <= ceiling)
    if is_deterministic(truth):
        last_losses = [last for _, last in outcomes]
        report.summary["last_xi_loss_cycle"] = max(last_losses)
        report.verdicts["xi_losses_stop"] = max(last_losses) <= cfg.cycles // 2
    return report


# ----------------------------------------------------------------------
# AIxi on a bandit
# ----------------------------------------------------------------------

def bandit_seed(truth: BernoulliBandit, model_class: ModelClass, planner: PlannerConfig, seed: int) -> pd.DataFrame:
    """AIxi interacting with a bandit for ``planner.total_cycles`` cycles."""
    rng = np.random.default_rng(seed)
    mixture = MixtureModel(model_class)
    tape = HistoryTape.for_model(truth)
    best = truth.best_arm
    rows = []
    cumulative = 0.0
    for t in range(1, planner.total_cycles + 1):
        y = select_action(mixture, tape, planner).action
        percepts, actions = tape.percepts, tape.actions + (y,)
        x = truth.sample_next(percepts, actions, rng)
        if planner.loss_source == "embedded":
            loss = float(truth.loss_alphabet.value(x.loss_level))
        else:
            loss = float(planner.loss(percepts + (x,), actions))
        cumulative += loss
        mixture = mixture.advance(y, x)
        tape = tape.append_cycle(y, x)
        row = {"cycle": t, "action": y.index, "percept": str(x), "loss": loss,
               "cumulative_loss": cumulative, "optimal": int(y.index == best)}
        for name, w in zip(model_class.names, mixture.posterior_weights):
            row[f"w_{name}"] = float(w)
        rows.append(row)
    return pd.DataFrame(rows)


def run_bandit_aixi(cfg: ExperimentConfig, manager: PluginManager, workers: int = 1, fmt: str = "csv", quiet: bool = False) -> ExperimentReport:
    """
    AIxi with a bandit model class; reports the optimal-arm fraction per half and at checkpoints.
    """
    run_id = str(uuid.uuid4())
    report = _report(cfg, run_id)
    truth = cfg.build_truth(manager)
    if not isinstance(truth, BernoulliBandit):
        raise ConfigError("bandit-aixi needs a bandit environment")
    model_class = cfg.build_class(manager)
    truth_index = _locate_truth(truth, model_class, report)
    loss = None if cfg.planner.get("loss_source") == "embedded" else cfg.build_loss(truth.observation_alphabet.size, truth.n_arms)
    planner = cfg.planner_config(loss)
    checkpoints = _checkpoints(cfg)

    frames = map_seeds(partial(bandit_seed, truth, model_class, planner), cfg.seeds, workers, "bandit-aixi", quiet)
    meta = _meta(cfg, run_id)
    for seed, frame in zip(cfg.seeds, frames):
        report.csv_paths.append(write_table(frame, os.path.join(cfg.output_dir, f"bandit_seed{seed}"), meta, fmt))

    half = cfg.cycles // 2
    first = float(np.mean([frame["optimal"].iloc[:half].mean() for frame in frames])) if half else float("nan")
    second = float(np.mean([frame["optimal"].iloc[half:].mean() for frame in frames]))
    rows = [{
        "checkpoint": c,
        "optimal_fraction": float(np.mean([frame["optimal"].iloc[:c].mean() for frame in frames])),
        "mean_cumulative_loss": float(np.mean([frame["cumulative_loss"].iloc[c - 1] for frame in frames])),
    } for c in checkpoints]
    table = pd.DataFrame(rows)
    report.csv_paths.append(write_table(table, os.path.join(cfg.output_dir, "bandit_summary"), meta, fmt))
    report.summary["optimal_fraction_first_half"] = first
    report.summary["optimal_fraction_second_half"] = second
    report.summary["checkpoints"] = {str(r["checkpoint"]): {k: v for k, v in r.items() if k != "checkpoint"} for r in rows}

    if truth_index is None or not half:
        report.verdicts["exploitation_increases"] = None
    else:
        # a run that is optimal from the first cycle cannot improve further
        report.verdicts["exploitation_increases"] = bool(second > first or first == second == 1.0)
    return report


RUNNERS = {
    "convergence": run_convergence,
    "regret": run_regret,
    "bandit-aixi": run_bandit_aixi,
}


def run_experiment(cfg: ExperimentConfig, manager: PluginManager, workers: int = 1, fmt: str = "csv", quiet: bool = False) -> ExperimentReport:
    """
    Run the experiment named by ``cfg.kind`` and save its report next to its tables.

    Args:
        cfg: Resolved experiment config
        manager: Plugin manager used to build environments
        workers: Processes across seeds
        fmt: "csv" or "gnuplot"
        quiet: Suppress progress bars

    Returns:
        The saved report
    """
    os.makedirs(cfg.output_dir, exist_ok=True)
    logger.info(f"Running {cfg.kind} on {len(cfg.seeds)} seeds, output in {cfg.output_dir}")
    if cfg.kind in RUNNERS:
        report = RUNNERS[cfg.kind](cfg, manager, workers, fmt, quiet)
    elif cfg.kind in KIND_SUITES:
        report = run_planner_suites(cfg, fmt)
    else:
        raise ConfigError(f"Unknown experiment kind: {cfg.kind}")
    path = report.save(cfg.output_dir)
    logger.info(f"Report written to {path}: {'PASS' if report.passed else 'FAIL'}")
    return report
