"""
Finite-horizon expectimax planning (AImu with the true environment, AIxi with
a mixture), the exhaustive policy oracle, MDP value iteration and the greedy
reduction check.

    V(h, t) = min_y sum_x [l_t + V(h y x, t + 1)] * model(x | h, y),   V(., last + 1) = 0

Branches receive immutable model snapshots (``model.advance``), so a
mixture is conditioned on every hypothetical branch history.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Dict, Iterator, List, Optional, Tuple
import logging
import time

import numpy as np

from core.environment import Actions, EnvironmentModel, Percepts, enumerate_histories
from core.errors import (
    ConfigError,
    HistoryIndexError,
    InstanceTooLargeError,
    NotApplicableError,
    UnreachableHistoryError,
)
from core.history import ActionSymbol, HistoryTape, PerceptSymbol, build_tape
from core.loss import LossSpec, MatrixLoss
from core.numeric import TIE_TOLERANCE, Probability, accumulate, argmin_first, format_number

logger = logging.getLogger(__name__)

HORIZON_MODES = ("fixed", "receding")
LOSS_SOURCES = ("explicit", "embedded")

# Exhaustive enumeration guards
MAX_ORACLE_LEAVES = 10 ** 6
MAX_ORACLE_POLICIES = 10 ** 6


@dataclass
class PlannerConfig:
    """
    Horizon and loss settings of the planner.

    In fixed mode every decision plans to cycle ``total_cycles``; in receding
    mode a decision at cycle t plans to min(t + window - 1, total_cycles).
    """

    total_cycles: int
    horizon_mode: str = "fixed"
    window: Optional[int] = None
    loss_source: str = "explicit"
    loss: Optional[LossSpec] = None
    memoize: bool = False
    root_workers: int = 1
    tie_tolerance: float = TIE_TOLERANCE

    def __post_init__(self):
        if self.total_cycles < 1:
            raise ConfigError(f"Planner needs total_cycles >= 1, got {self.total_cycles}")
        if self.horizon_mode not in HORIZON_MODES:
            raise ConfigError(f"Unknown horizon mode: {self.horizon_mode}")
        if self.horizon_mode == "receding" and (self.window is None or self.window < 1):
            raise ConfigError("Receding horizon needs window >= 1")
        if self.loss_source not in LOSS_SOURCES:
            raise ConfigError(f"Unknown loss source: {self.loss_source}")
        if self.loss_source == "explicit" and self.loss is None:
            raise ConfigError("Explicit loss source needs a loss")

    def last_cycle(self, t: int) -> int:
        """Last cycle planned for by a decision taken at cycle t."""
        if self.horizon_mode == "receding":
            return min(t + self.window - 1, self.total_cycles)
        return self.total_cycles


@dataclass(frozen=True)
class PlanResult:
    action: ActionSymbol
    value: Probability
    action_values: Tuple[Probability, ...]
    node_count: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def to_audit(self) -> dict:
        return {
            "chosen_action": self.action.index,
            "value": format_number(self.value),
            "action_values": [format_number(v) for v in self.action_values],
            "node_count": self.node_count,
            "wall_time": self.wall_time,
        }


@dataclass
class _Search:
    cfg: PlannerConfig
    last: int
    memo_context: Optional[int]
    memo: Dict[tuple, Probability] = field(default_factory=dict)
    node_count: int = 0


def _cycle_loss(cfg: PlannerConfig, node: EnvironmentModel, percepts: Percepts, actions: Actions) -> Probability:
    if cfg.loss_source == "embedded":
        return node.loss_alphabet.value(percepts[-1].loss_level)
    return cfg.loss(percepts, actions)


def _memo_context(model: EnvironmentModel, cfg: PlannerConfig) -> Optional[int]:
    if not cfg.memoize or model.context_length is None:
        return None
    if cfg.loss_source == "embedded":
        return model.context_length
    if cfg.loss.context_length is None:
        return None
    return max(model.context_length, cfg.loss.context_length)


def _q_value(node: EnvironmentModel, percepts: Percepts, actions: Actions, y: ActionSymbol, t: int, search: _Search) -> Probability:
    """Expected loss of cycles t..last when y is taken at cycle t."""
    search.node_count += 1
    branch_actions = actions + (y,)
    terms = []
    for x, p in node.step_items(percepts, branch_actions):
        child_percepts = percepts + (x,)
        loss = _cycle_loss(search.cfg, node, child_percepts, branch_actions)
        if t < search.last:
            loss = loss + _value(node.advance(y, x), child_percepts, branch_actions, t + 1, search)
        terms.append(p * loss)
    return accumulate(terms)


def _value(node: EnvironmentModel, percepts: Percepts, actions: Actions, t: int, search: _Search) -> Probability:
    key = None
    if search.memo_context is not None:
        k = search.memo_context
        key = (percepts[-k:] if k else (), actions[-k:] if k else (), t)
        if key in search.memo:
            return search.memo[key]
    value = min(_q_value(node, percepts, actions, y, t, search) for y in node.action_space)
    if key is not None:
        search.memo[key] = value
    return value


def _root(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, t: Optional[int]) -> Tuple[EnvironmentModel, Percepts, Actions, int]:
    t = h.length + 1 if t is None else t
    if t != h.length + 1:
        raise HistoryIndexError(f"Cycle {t} does not follow a history of {h.length} completed cycles")
    if t > cfg.total_cycles + 1:
        raise HistoryIndexError(f"Cycle {t} is beyond the lifetime of {cfg.total_cycles} cycles")
    if cfg.loss_source == "embedded" and not model.embeds_loss:
        raise ConfigError(f"Embedded loss source needs percepts with loss levels; {model.name} has none")
    percepts, actions = h.percepts, h.actions
    return model.condition_on(percepts, actions), percepts, actions, t


def expectimax_value(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, t: Optional[int] = None) -> Probability:
    """
    Minimal expected sum of losses for cycles t..last.

    Args:
        model: True environment (AImu) or mixture (AIxi)
        h: History of the t-1 completed cycles
        cfg: Planner configuration
        t: Current cycle (defaults to len(h) + 1)

    Returns:
        Optimal value; 0 when no cycle remains

    Raises:
        UnreachableHistoryError: If h has probability zero under the model
    """
    root, percepts, actions, t = _root(model, h, cfg, t)
    last = cfg.last_cycle(t)
    if t > last:
        return 0
    search = _Search(cfg, last, _memo_context(model, cfg))
    return _value(root, percepts, actions, t, search)


def select_action(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, t: Optional[int] = None) -> PlanResult:
    """
    Expectimax decision at cycle t with per-root-action values for audit.

    Root actions may be evaluated in a thread pool (``cfg.root_workers``);
    results are joined in action-index order and ties go to the smallest index.

    Raises:
        UnreachableHistoryError: If h has probability zero under the model
        HistoryIndexError: If no cycle remains
    """
    start = time.perf_counter()
    root, percepts, actions, t = _root(model, h, cfg, t)
    last = cfg.last_cycle(t)
    if t > last:
        raise HistoryIndexError(f"No decision left at cycle {t} (last cycle {last})")
    memo_context = _memo_context(model, cfg)

    def evaluate(y: ActionSymbol) -> Tuple[Probability, int]:
        search = _Search(cfg, last, memo_context)
        return _q_value(root, percepts, actions, y, t, search), search.node_count

    if cfg.root_workers > 1 and len(root.action_space) > 1:
        with ThreadPoolExecutor(max_workers=cfg.root_workers) as pool:
            outcomes = list(pool.map(evaluate, root.action_space))
    else:
        outcomes = [evaluate(y) for y in root.action_space]
    values = tuple(v for v, _ in outcomes)
    best = argmin_first(values, cfg.tie_tolerance)
    result = PlanResult(
        action=ActionSymbol(best),
        value=values[best],
        action_values=values,
        node_count=sum(n for _, n in outcomes),
        wall_time=time.perf_counter() - start,
    )
    logger.debug(f"Cycle {t}: action {best} value {float(values[best]):.6g} ({result.node_count} nodes)")
    return result


# ----------------------------------------------------------------------
# Exhaustive policy oracle
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PolicyTree:
    """Deterministic policy over future histories: an action and one subtree per reachable percept."""

    action: int
    children: Tuple[Tuple[PerceptSymbol, "PolicyTree"], ...] = ()

    def child(self, x: PerceptSymbol) -> Optional["PolicyTree"]:
        for percept, subtree in self.children:
            if percept == x:
                return subtree
        return None

    def actions_taken(self) -> Iterator[int]:
        yield self.action
        for _, subtree in self.children:
            yield from subtree.actions_taken()


def _oracle_guard(model: EnvironmentModel, remaining: int) -> None:
    leaves = (len(model.percept_space) * len(model.action_space)) ** remaining
    if leaves > MAX_ORACLE_LEAVES:
        raise InstanceTooLargeError(f"{remaining} cycles over {model.name} give {leaves} leaves (limit {MAX_ORACLE_LEAVES})")


def _count_policies(node: EnvironmentModel, percepts: Percepts, actions: Actions, t: int, last: int) -> int:
    if t > last:
        return 1
    total = 0
    for y in node.action_space:
        branch = actions + (y,)
        count = 1
        for x, _ in node.step_items(percepts, branch):
            count *= _count_policies(node.advance(y, x), percepts + (x,), branch, t + 1, last)
            if count > MAX_ORACLE_POLICIES:
                return count
        total += count
        if total > MAX_ORACLE_POLICIES:
            return total
    return total


def _policies(node: EnvironmentModel, percepts: Percepts, actions: Actions, t: int, last: int) -> List[Optional[PolicyTree]]:
    if t > last:
        return [None]
    trees: List[PolicyTree] = []
    for y in node.action_space:
        branch = actions + (y,)
        reachable = [x for x, _ in node.step_items(percepts, branch)]
        options = [_policies(node.advance(y, x), percepts + (x,), branch, t + 1, last) for x in reachable]
        for combo in cartesian(*options):
            children = tuple((x, sub) for x, sub in zip(reachable, combo) if sub is not None)
            trees.append(PolicyTree(y.index, children))
    return trees


def enumerate_policies(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, t: Optional[int] = None) -> List[PolicyTree]:
    """
    Every deterministic policy tree over the reachable future histories.

    Raises:
        InstanceTooLargeError: If the leaves or the policies exceed the guards
    """
    root, percepts, actions, t = _root(model, h, cfg, t)
    last = cfg.last_cycle(t)
    if t > last:
        return []
    _oracle_guard(root, last - t + 1)
    count = _count_policies(root, percepts, actions, t, last)
    if count > MAX_ORACLE_POLICIES:
        raise InstanceTooLargeError(f"More than {MAX_ORACLE_POLICIES} policies from cycle {t} to {last}")
    return _policies(root, percepts, actions, t, last)


def policy_expected_loss(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, policy: PolicyTree, t: Optional[int] = None) -> Probability:
    """
    Expected loss of a policy tree by full summation over percept sequences.

    Every sequence x_t..x_last is enumerated; its probability is the chain
    product along the policy's actions and it contributes probability times
    summed loss.
    """
    root, percepts, actions, t = _root(model, h, cfg, t)
    last = cfg.last_cycle(t)
    if t > last:
        return 0
    _oracle_guard(root, last - t + 1)
    terms = []
    for sequence in cartesian(root.percept_space, repeat=last - t + 1):
        node, tree = root, policy
        path_percepts, path_actions = percepts, actions
        probability: Probability = 1
        losses = []
        for x in sequence:
            y = ActionSymbol(tree.action)
            path_actions = path_actions + (y,)
            p = node.step_distribution(path_percepts, path_actions)[node.percept_index(x)]
            if p == 0:
                probability = 0
                break
            probability = probability * p
            path_percepts = path_percepts + (x,)
            losses.append(_cycle_loss(cfg, node, path_percepts, path_actions))
            if len(losses) < len(sequence):
                node = node.advance(y, x)
                tree = tree.child(x)
        if probability != 0:
            terms.append(probability * accumulate(losses))
    return accumulate(terms)


def brute_force_value(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, t: Optional[int] = None) -> Probability:
    """
    Minimum expected loss over all enumerated deterministic policies.

    Independent of the expectimax recursion; agrees with ``expectimax_value``
    exactly under rational arithmetic.

    Raises:
        InstanceTooLargeError: If the instance exceeds the enumeration guards
    """
    policies = enumerate_policies(model, h, cfg, t)
    if not policies:
        return 0
    return min(policy_expected_loss(model, h, cfg, policy, t) for policy in policies)


def expectimax_policy(model: EnvironmentModel, h: HistoryTape, cfg: PlannerConfig, t: Optional[int] = None) -> PolicyTree:
    """Policy tree of the expectimax decisions on every reachable future history."""
    root, percepts, actions, t = _root(model, h, cfg, t)
    last = cfg.last_cycle(t)
    if t > last:
        raise HistoryIndexError(f"No decision left at cycle {t}")
    _oracle_guard(root, last - t + 1)

    def build(node: EnvironmentModel, path_percepts: Percepts, path_actions: Actions, cycle: int) -> PolicyTree:
        search = _Search(cfg, last, None)
        values = [_q_value(node, path_percepts, path_actions, y, cycle, search) for y in node.action_space]
        y = ActionSymbol(argmin_first(values, cfg.tie_tolerance))
        branch = path_actions + (y,)
        children = ()
        if cycle < last:
            children = tuple(
                (x, build(node.advance(y, x), path_percepts + (x,), branch, cycle + 1))
                for x, _ in node.step_items(path_percepts, branch)
            )
        return PolicyTree(y.index, children)

    return build(root, percepts, actions, t)


# ----------------------------------------------------------------------
# Bellman cross-check
# ----------------------------------------------------------------------

@dataclass
class ValueTable:
    """
    Backward-induction table of an MDP.

    ``values[t - 1, s]`` is V_t(s), the optimal loss of cycles t..n when the
    previous state is s; row n is the terminal zero row.
    """

    values: np.ndarray
    policy: np.ndarray
    root_value: float
    root_action_values: np.ndarray


def value_iteration_mdp(mdp, loss: MatrixLoss, n: int) -> ValueTable:
    """
    Finite-horizon Bellman backups on a finite MDP.

    V_{n+1} = 0 and V_t(s) = min_y sum_s' [l(s', y) + V_{t+1}(s')] T[s, y, s'].
    The root value uses the initial state distribution for the first cycle.

    Args:
        mdp: MdpEnvironment
        loss: Loss matrix indexed [state][action]
        n: Horizon

    Returns:
        Value table
    """
    if n < 0:
        raise ValueError(f"Horizon must be non-negative, got {n}")
    transitions = mdp.transition_array()
    n_states, n_actions = transitions.shape[0], transitions.shape[1]
    loss.check_alphabets(n_states, n_actions)
    losses = np.array([[float(v) for v in row] for row in loss.matrix])
    values = np.zeros((n + 1, n_states))
    policy = np.zeros((n, n_states), dtype=int)
    immediate = np.einsum("iaj,ja->ia", transitions, losses)
    for t in range(n - 1, -1, -1):
        q = immediate + transitions @ values[t + 1]
        policy[t] = np.argmin(q, axis=1)
        values[t] = q.min(axis=1)
    if n == 0:
        return ValueTable(values, policy, 0.0, np.zeros(n_actions))
    initial = mdp.initial_array()
    root_q = initial @ (losses + values[1][:, None])
    return ValueTable(values, policy, float(root_q.min()), root_q)


# ----------------------------------------------------------------------
# Greedy reduction
# ----------------------------------------------------------------------

def greedy_reduction_check(model: EnvironmentModel, loss: LossSpec, cfg: PlannerConfig) -> bool:
    """
    Check that expectimax equals the one-step Bayes decision on every history.

    Sweeps every reachable history at which a decision remains, that is all
    lengths 0..n-1 for a lifetime of n cycles (n = 4 covers every history of
    length <= 3), and compares ``select_action`` with the passive
    predictor's ``bayes_action``.

    Raises:
        NotApplicableError: Unless the model is flagged action-independent and the loss is a matrix
    """
    from core.predictor import PredictorPolicy

    if not model.action_independent:
        raise NotApplicableError(f"{model.name} is not flagged action-independent")
    if not isinstance(loss, MatrixLoss) or cfg.loss_source != "explicit":
        raise NotApplicableError("Greedy reduction needs an explicit per-cycle loss matrix")
    loss.check_alphabets(model.observation_alphabet.size, model.action_alphabet.size)
    predictor = PredictorPolicy(model, loss)
    cfg = PlannerConfig(total_cycles=cfg.total_cycles, loss=loss, tie_tolerance=cfg.tie_tolerance)
    checked = 0
    for length in range(cfg.total_cycles):
        for percepts, actions in enumerate_histories(model, length):
            tape = build_tape(model.action_alphabet, model.observation_alphabet, actions, percepts, model.loss_alphabet)
            try:
                planned = select_action(model, tape, cfg).action
                greedy = predictor.bayes_action(percepts, actions)
            except UnreachableHistoryError:
                continue
            checked += 1
            if planned != greedy:
                logger.info(f"Greedy mismatch on history '{tape.serialize()}': planner {planned}, predictor {greedy}")
                return False
    logger.debug(f"Greedy reduction held on {checked} histories of {model.name}")
    return True

