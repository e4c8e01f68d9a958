"""
Exhaustive and cross-implementation checks of the planner.

Each suite returns a list of case records ``{suite, case, status, ...}``
with status "pass", "fail" or "not-applicable"; a suite passes when no case
fails.
"""

from fractions import Fraction
from itertools import product as cartesian
from typing import Any, Callable, Dict, List, Optional, Sequence
import logging
import os
import uuid

import numpy as np
import pandas as pd

import config
from core.environment import EnvironmentModel, absorb_loss, laws_agree
from core.errors import NotApplicableError
from core.history import HistoryTape, loss_grid
from core.loss import MatrixLoss
from core.mixture import MixtureModel, ModelClass
from core.numeric import format_number, is_exact
from core.planner import (
    PlannerConfig,
    brute_force_value,
    enumerate_policies,
    expectimax_policy,
    expectimax_value,
    greedy_reduction_check,
    policy_expected_loss,
    select_action,
    value_iteration_mdp,
)
from plugins.bandit_plugin import make_bandit
from plugins.bernoulli_plugin import make_bernoulli
from plugins.mdp_plugin import random_mdp
from plugins.table_plugin import TableEnvironment
from simulation.data_loader import ExperimentConfig
from simulation.evaluation import ExperimentReport
from utils.csv_utils import write_table

logger = logging.getLogger(__name__)

SUITES = ("planner-oracle", "policy-optimality", "mdp-crosscheck", "greedy-check", "loss-absorption")

PASS, FAIL, NOT_APPLICABLE = "pass", "fail", "not-applicable"


def _case(suite: str, case: str, ok: bool, **detail: Any) -> Dict[str, Any]:
    record = {"suite": suite, "case": case, "status": PASS if ok else FAIL}
    record.update({k: format_number(v) if isinstance(v, (float, Fraction)) else v for k, v in detail.items()})
    return record


def _equal(a, b, tolerance: float) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    return abs(float(a) - float(b)) <= tolerance


def _oracle_grid(settings: Dict[str, Any]) -> List[Fraction]:
    return [Fraction(str(v)) for v in settings.get("oracle_grid", config.EXPERIMENT_CONFIG["oracle_grid"])]


def _to_float(rows: Sequence[Sequence[Fraction]]) -> List[List[float]]:
    return [[float(p) for p in row] for row in rows]


def action_dependent_sources(grid: Sequence[Fraction], exact: bool = True) -> List[EnvironmentModel]:
    """Order-0 binary sources with P(1 | y=0) = a and P(1 | y=1) = b for every (a, b) in the grid."""
    envs = []
    for a, b in cartesian(grid, repeat=2):
        rows = [[1 - a, a], [1 - b, b]]
        envs.append(TableEnvironment(0, rows if exact else _to_float(rows), 2, 2, name=f"src({a},{b})"))
    return envs


def sticky_families(grid: Sequence[Fraction], exact: bool = True) -> List[EnvironmentModel]:
    """
    Order-1 binary tables: the first percept is 1 with probability a (y=0)
    or b (y=1); later percepts repeat the previous one with that probability.
    """
    envs = []
    for a, b in cartesian(grid, repeat=2):
        stay = {0: a, 1: b}
        rows = []
        for context in (0, 1, 2):  # previous observation 0, 1, or start marker
            for y in (0, 1):
                q = stay[y]
                if context == 2:
                    rows.append([1 - q, q])
                elif context == 1:
                    rows.append([1 - q, q])
                else:
                    rows.append([q, 1 - q])
        envs.append(TableEnvironment(1, rows if exact else _to_float(rows), 2, 2, name=f"sticky({a},{b})"))
    return envs


def oracle_losses(exact: bool = True) -> List[MatrixLoss]:
    quarter = Fraction(1, 4) if exact else 0.25
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    return [MatrixLoss.zero_one(2, exact), MatrixLoss([[zero, quarter], [one, zero]], name="asymmetric")]


def _oracle_case(suite: str, name: str, model: EnvironmentModel, cfg: PlannerConfig, tolerance: float) -> Dict[str, Any]:
    tape = HistoryTape.for_model(model)
    value = expectimax_value(model, tape, cfg)
    oracle = brute_force_value(model, tape, cfg)
    return _case(suite, name, _equal(value, oracle, tolerance), expectimax=value, brute_force=oracle)


def planner_oracle_suite(settings: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    expectimax_value against brute_force_value on every instance of the rational grid.

    Covers order-0 action-dependent and order-1 sources in exact and float
    arithmetic, two-member mixtures (AIxi) and an embedded-loss bandit.
    """
    suite = "planner-oracle"
    grid = _oracle_grid(settings)
    horizons = settings.get("oracle_horizons", config.EXPERIMENT_CONFIG["oracle_horizons"])
    tolerance = float(settings.get("float_tolerance", 1e-12))
    cases = []
    for exact in (True, False):
        families = action_dependent_sources(grid, exact)
        if exact:
            families += sticky_families(grid, exact)
        for env in families:
            for loss in oracle_losses(exact):
                for n in horizons:
                    cfg = PlannerConfig(total_cycles=n, loss=loss)
                    label = f"{env.name} {loss.name} n={n} {'exact' if exact else 'float'}"
                    cases.append(_oracle_case(suite, label, env, cfg, tolerance))

    sources = action_dependent_sources(grid, exact=True)
    for left, right in [(1, 23), (6, 18), (7, 17), (12, 13), (3, 21)]:
        if right >= len(sources):
            continue
        model_class = ModelClass([sources[left], sources[right]], [0.5, 0.5])
        mixture = MixtureModel(model_class)
        for n in [h for h in horizons if h <= 2]:
            cfg = PlannerConfig(total_cycles=n, loss=MatrixLoss.zero_one(2))
            cases.append(_oracle_case(suite, f"mixture({sources[left].name},{sources[right].name}) n={n}", mixture, cfg, tolerance))

    bandit = make_bandit(["1/4", "3/4"])
    cfg = PlannerConfig(total_cycles=2, loss_source="embedded")
    cases.append(_oracle_case(suite, "bandit(1/4,3/4) embedded n=2", bandit, cfg, tolerance))
    return cases


def random_rational_table(rng: np.random.Generator, grid: Sequence[Fraction]) -> TableEnvironment:
    rows = []
    for _ in range(3 * 2):
        q = grid[int(rng.integers(len(grid)))]
        rows.append([1 - q, q])
    return TableEnvironment(1, rows, 2, 2, name="random-table")


def policy_optimality_suite(settings: Dict[str, Any], seed: int = 0) -> List[Dict[str, Any]]:
    """Expected loss of the expectimax policy against every enumerated deterministic policy."""
    suite = "policy-optimality"
    rng = np.random.default_rng(seed)
    grid = _oracle_grid(settings)
    tolerance = float(settings.get("float_tolerance", 1e-12))
    count = int(settings.get("policy_instances", 20))
    losses = oracle_losses(exact=True)
    cases = []
    for i in range(count):
        env = random_rational_table(rng, grid)
        n = 1 + i % 3
        cfg = PlannerConfig(total_cycles=n, loss=losses[i % len(losses)])
        tape = HistoryTape.for_model(env)
        chosen = policy_expected_loss(env, tape, cfg, expectimax_policy(env, tape, cfg))
        policies = enumerate_policies(env, tape, cfg)
        best_other = min(policy_expected_loss(env, tape, cfg, p) for p in policies)
        ok = chosen <= best_other + tolerance and _equal(chosen, expectimax_value(env, tape, cfg), tolerance)
        cases.append(_case(suite, f"instance {i} n={n}", ok, policy_loss=chosen, best_enumerated=best_other, policies=len(policies)))
    return cases


def mdp_crosscheck_suite(settings: Dict[str, Any], seed: int = 0) -> List[Dict[str, Any]]:
    """
    value_iteration_mdp against expectimax on random MDPs, with and without
    memoization, and the MDP law against the same tensor as a generic table.
    """
    suite = "mdp-crosscheck"
    rng = np.random.default_rng(seed)
    count = int(settings.get("mdp_instances", 100))
    max_states = int(settings.get("mdp_max_states", 3))
    max_horizon = int(settings.get("mdp_max_horizon", 5))
    tolerance = float(settings.get("crosscheck_tolerance", 1e-9))
    depth = int(settings.get("specialization_depth", 4))
    cases = []
    for i in range(count):
        n_states = int(rng.integers(1, max_states + 1))
        n = int(rng.integers(1, max_horizon + 1))
        mdp = random_mdp(rng, n_states, 2)
        loss = MatrixLoss(rng.random((n_states, 2)).tolist(), name="random")
        table = value_iteration_mdp(mdp, loss, n)
        tape = HistoryTape.for_model(mdp)
        plain = expectimax_value(mdp, tape, PlannerConfig(total_cycles=n, loss=loss))
        cached = expectimax_value(mdp, tape, PlannerConfig(total_cycles=n, loss=loss, memoize=True))
        same_law = laws_agree(mdp, mdp.as_table(), depth)
        ok = abs(table.root_value - float(plain)) <= tolerance and abs(float(plain) - float(cached)) <= tolerance and same_law
        cases.append(_case(suite, f"mdp {i} states={n_states} n={n}", ok, bellman=table.root_value, expectimax=float(plain), table_law=same_law))
    return cases


def greedy_check_suite(settings: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    Greedy reduction on action-independent sources and mixtures; bandits are not applicable.

    A lifetime of ``greedy_cycles`` (default 4) sweeps every history up to one cycle shorter.
    """
    suite = "greedy-check"
    n = int(settings.get("greedy_cycles", config.EXPERIMENT_CONFIG["greedy_cycles"]))
    losses = oracle_losses(exact=True)
    cases = []
    candidates: List[EnvironmentModel] = [make_bernoulli(p) for p in ["0", "1/4", "1/2", "7/10", "1"]]
    candidates.append(make_bernoulli(0.7))
    candidates.append(MixtureModel(ModelClass([make_bernoulli("1/4"), make_bernoulli("3/4")], [0.5, 0.5])))
    for model in candidates:
        for loss in losses:
            cfg = PlannerConfig(total_cycles=n, loss=loss)
            cases.append(_case(suite, f"{model.name} {loss.name} n={n}", greedy_reduction_check(model, loss, cfg)))
    bandit = make_bandit([0.2, 0.8], embed_loss=False)
    try:
        greedy_reduction_check(bandit, MatrixLoss.bandit(2), PlannerConfig(total_cycles=n, loss=MatrixLoss.bandit(2)))
        cases.append(_case(suite, f"{bandit.name} guard", False, detail="expected not-applicable"))
    except NotApplicableError as e:
        cases.append({"suite": suite, "case": f"{bandit.name} guard", "status": NOT_APPLICABLE, "detail": str(e)})
    return cases


def _bandit_pipeline(truth: EnvironmentModel, model_class: ModelClass, cfg: PlannerConfig, cycles: int, seed: int):
    """AIxi actions and losses for one seeded run."""
    rng = np.random.default_rng(seed)
    mixture = MixtureModel(model_class)
    tape = HistoryTape.for_model(truth)
    actions, losses = [], []
    for _ in range(cycles):
        y = select_action(mixture, tape, cfg).action
        x = truth.sample_next(tape.percepts, tape.actions + (y,), rng)
        if cfg.loss_source == "embedded":
            losses.append(truth.loss_alphabet.value(x.loss_level))
        else:
            losses.append(cfg.loss(tape.percepts + (x,), tape.actions + (y,)))
        mixture = mixture.advance(y, x)
        tape = tape.append_cycle(y, x)
        actions.append(y.index)
    return actions, losses


def loss_absorption_suite(settings: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    Explicit-loss AIxi on outcome bandits against embedded-loss AIxi on their absorbed versions.

    Both pipelines see the same seeded draws and must agree on every action
    and on the total loss.
    """
    suite = "loss-absorption"
    seeds = int(settings.get("absorption_seeds", 100))
    cycles = int(settings.get("absorption_cycles", 6))
    window = 2
    loss = MatrixLoss.bandit(2)
    grid = loss_grid(2)
    truth = make_bandit([0.2, 0.8], embed_loss=False)
    members = [make_bandit([0.2, 0.8], embed_loss=False), make_bandit([0.8, 0.2], embed_loss=False)]
    plain_class = ModelClass(members, [0.5, 0.5])
    absorbed_class = ModelClass([absorb_loss(m, loss, grid) for m in members], [0.5, 0.5])
    absorbed_truth = absorb_loss(truth, loss, grid)
    explicit = PlannerConfig(total_cycles=cycles, horizon_mode="receding", window=window, loss=loss)
    embedded = PlannerConfig(total_cycles=cycles, horizon_mode="receding", window=window, loss_source="embedded")
    cases = []
    for seed in range(seeds):
        actions_a, losses_a = _bandit_pipeline(truth, plain_class, explicit, cycles, seed)
        actions_b, losses_b = _bandit_pipeline(absorbed_truth, absorbed_class, embedded, cycles, seed)
        total_a, total_b = sum(float(l) for l in losses_a), sum(float(l) for l in losses_b)
        ok = actions_a == actions_b and total_a == total_b
        cases.append(_case(suite, f"seed {seed}", ok, actions="".join(map(str, actions_a)), total_loss=total_a))
    return cases


SUITE_RUNNERS: Dict[str, Callable[[Dict[str, Any]], List[Dict[str, Any]]]] = {
    "planner-oracle": planner_oracle_suite,
    "policy-optimality": policy_optimality_suite,
    "mdp-crosscheck": mdp_crosscheck_suite,
    "greedy-check": greedy_check_suite,
    "loss-absorption": loss_absorption_suite,
}

# Suites run for each experiment kind
KIND_SUITES = {
    "planner-oracle": ["planner-oracle", "policy-optimality"],
    "mdp-crosscheck": ["mdp-crosscheck"],
    "greedy-check": ["greedy-check"],
    "loss-absorption": ["loss-absorption"],
    "planner-suites": list(SUITES),
}


def run_planner_suites(cfg: ExperimentConfig, fmt: str = "csv", suites: Optional[Sequence[str]] = None) -> ExperimentReport:
    """
    Run the planner suites configured for the experiment and collect verdicts.

    Args:
        cfg: Experiment config (its ``experiment`` section holds suite settings)
        fmt: Output table format
        suites: Suite names overriding the experiment kind's default

    Returns:
        Report with one verdict per suite and one case record per instance
    """
    run_id = str(uuid.uuid4())
    report = ExperimentReport(kind=cfg.kind, config_hash=cfg.config_hash, version=cfg.version, run_id=run_id)
    names = list(suites or cfg.experiment.get("suites") or KIND_SUITES.get(cfg.kind, SUITES))
    meta = {"config_hash": cfg.config_hash, "version": cfg.version, "run_id": run_id}
    for name in names:
        if name not in SUITE_RUNNERS:
            raise NotApplicableError(f"Unknown suite: {name}")
        logger.info(f"Running suite {name}")
        cases = SUITE_RUNNERS[name](cfg.experiment)
        failed = [c for c in cases if c["status"] == FAIL]
        report.cases.extend(cases)
        report.verdicts[name] = not failed
        report.summary[name] = {
            "cases": len(cases),
            "failed": len(failed),
            "not_applicable": sum(1 for c in cases if c["status"] == NOT_APPLICABLE),
        }
        frame = pd.DataFrame(cases).fillna("")
        report.csv_paths.append(write_table(frame, os.path.join(cfg.output_dir, f"suite_{name}"), meta, fmt))
        logger.info(f"Suite {name}: {len(cases)} cases, {len(failed)} failed")
    return report
