from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import config
from core.errors import ConfigError, HistoryIndexError, InstanceTooLargeError, NotApplicableError
from core.history import ActionSymbol, HistoryTape, PerceptSymbol
from core.loss import MatrixLoss
from core.mixture import MixtureModel, ModelClass
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
from plugins.mdp_plugin import make_mdp, random_mdp
from plugins.table_plugin import TableEnvironment
from simulation.suites import action_dependent_sources, sticky_families

from tests.conftest import A1, X1

ZERO_ONE = MatrixLoss.zero_one(exact=True)


def embedded(cycles, **kwargs):
    return PlannerConfig(total_cycles=cycles, loss_source="embedded", **kwargs)


def explicit(cycles, loss=ZERO_ONE, **kwargs):
    return PlannerConfig(total_cycles=cycles, loss=loss, **kwargs)


def empty(model):
    return HistoryTape.for_model(model)


class TestPlannerConfig:
    def test_lifetime_must_be_positive(self):
        with pytest.raises(ConfigError):
            explicit(0)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            explicit(3, horizon_mode="rolling")

    def test_receding_needs_window(self):
        with pytest.raises(ConfigError):
            explicit(3, horizon_mode="receding")

    def test_explicit_source_needs_loss(self):
        with pytest.raises(ConfigError):
            PlannerConfig(total_cycles=3)

    def test_last_cycle(self):
        cfg = explicit(10, horizon_mode="receding", window=3)
        assert cfg.last_cycle(1) == 3
        assert cfg.last_cycle(9) == 10
        assert explicit(10).last_cycle(4) == 10


class TestExpectimax:
    def test_one_cycle_bernoulli(self):
        model = make_bernoulli(0.7)
        result = select_action(model, empty(model), explicit(1, MatrixLoss.zero_one()))
        assert result.action.index == 1
        assert result.value == pytest.approx(0.3)
        assert result.action_values == pytest.approx((0.7, 0.3))

    def test_value_past_the_horizon_is_zero(self):
        model = make_bernoulli(0.7)
        tape = empty(model).append_cycle(A1, X1)
        assert expectimax_value(model, tape, explicit(1, MatrixLoss.zero_one())) == 0

    def test_no_decision_left(self):
        model = make_bernoulli(0.7)
        tape = empty(model).append_cycle(A1, X1)
        with pytest.raises(HistoryIndexError):
            select_action(model, tape, explicit(1, MatrixLoss.zero_one()))

    def test_bandit_matches_brute_force(self):
        bandit = make_bandit(["1/4", "3/4"])
        cfg = embedded(2)
        assert expectimax_value(bandit, empty(bandit), cfg) == Fraction(1, 2)
        assert brute_force_value(bandit, empty(bandit), cfg) == Fraction(1, 2)

    def test_dominating_arm(self):
        bandit = make_bandit(["1/2", "0"])
        result = select_action(bandit, empty(bandit), embedded(3))
        assert result.action.index == 1
        assert result.value == 0

    def test_symmetric_arms_tie_to_zero(self):
        bandit = make_bandit(["1/2", "1/2"])
        result = select_action(bandit, empty(bandit), embedded(2))
        assert result.action.index == 0
        assert result.action_values[0] == result.action_values[1]

    def test_symmetric_class_under_mixture(self):
        model_class = ModelClass([make_bandit([0.2, 0.8]), make_bandit([0.8, 0.2])])
        xi = MixtureModel(model_class)
        result = select_action(xi, empty(xi), embedded(2))
        assert result.action.index == 0
        assert result.action_values[0] == pytest.approx(result.action_values[1], abs=1e-12)

    def test_embedded_source_needs_loss_levels(self):
        model = make_bernoulli(0.5)
        with pytest.raises(ConfigError):
            select_action(model, empty(model), embedded(1))

    def test_memoised_search_agrees(self):
        model = sticky_families([Fraction(1, 4), Fraction(3, 4)])[1]
        plain = select_action(model, empty(model), explicit(4))
        memo = select_action(model, empty(model), explicit(4, memoize=True))
        assert memo.action_values == plain.action_values
        assert memo.node_count < plain.node_count

    def test_thread_pool_agrees(self):
        model = sticky_families([Fraction(1, 4), Fraction(3, 4)])[2]
        serial = select_action(model, empty(model), explicit(3))
        pooled = select_action(model, empty(model), explicit(3, root_workers=2))
        assert pooled == serial

    def test_receding_window_shortens_the_plan(self):
        model = make_bernoulli("7/10")
        cfg = explicit(10, horizon_mode="receding", window=2)
        assert expectimax_value(model, empty(model), cfg) == Fraction(3, 5)


class TestPolicyOracle:
    def test_lifetime_too_long(self):
        model = make_bernoulli(0.5)
        with pytest.raises(InstanceTooLargeError):
            brute_force_value(model, empty(model), explicit(20, MatrixLoss.zero_one()))

    def test_policy_count(self):
        bandit = make_bandit(["1/4", "3/4"])
        # two root actions, each followed by an independent choice after either outcome
        assert len(enumerate_policies(bandit, empty(bandit), embedded(2))) == 2 * 2 * 2

    def test_expectimax_policy_achieves_the_value(self):
        model = sticky_families([Fraction(1, 4), Fraction(3, 4)])[1]
        cfg = explicit(3)
        policy = expectimax_policy(model, empty(model), cfg)
        assert policy.action == select_action(model, empty(model), cfg).action.index
        assert policy_expected_loss(model, empty(model), cfg, policy) == expectimax_value(model, empty(model), cfg)


GRID = [Fraction(v) for v in config.EXPERIMENT_CONFIG["oracle_grid"]]
ASYMMETRIC = MatrixLoss([["0", "1/4"], ["1", "0"]], name="asymmetric")


@st.composite
def rational_tables(draw):
    """Order-0 or order-1 binary tables with entries on the quarter grid."""
    order = draw(st.integers(0, 1))
    size = 2 * 3 ** order
    numerators = draw(st.lists(st.integers(0, 4), min_size=size, max_size=size))
    return TableEnvironment(order, [[1 - Fraction(k, 4), Fraction(k, 4)] for k in numerators], 2, 2)


def reachable_tape(model, cycles):
    """Tape over the given (y, x) pairs, flipping any x the model rules out."""
    tape = empty(model)
    for y, x in cycles:
        action = ActionSymbol(y)
        row = model.step_distribution(tape.percepts, tape.actions + (action,))
        if row[x] == 0:
            x = 1 - x
        tape = tape.append_cycle(action, PerceptSymbol(x))
    return tape


losses = st.sampled_from([ZERO_ONE, ASYMMETRIC])
cycle_pairs = st.tuples(st.integers(0, 1), st.integers(0, 1))


@pytest.mark.property
class TestOracleProperties:
    @settings(max_examples=100, deadline=None)
    @given(rational_tables(), losses, st.integers(1, 3))
    def test_expectimax_equals_brute_force(self, model, loss, cycles):
        cfg = explicit(cycles, loss)
        assert expectimax_value(model, empty(model), cfg) == brute_force_value(model, empty(model), cfg)

    @settings(max_examples=100, deadline=None)
    @given(rational_tables(), losses, st.integers(1, 4), st.lists(cycle_pairs, max_size=4))
    def test_value_is_bounded_by_the_remaining_cycles(self, model, loss, cycles, pairs):
        tape = reachable_tape(model, pairs[:cycles])
        value = expectimax_value(model, tape, explicit(cycles, loss))
        assert 0 <= value <= cycles - tape.length

    @settings(max_examples=100, deadline=None)
    @given(rational_tables(), losses, st.integers(1, 3))
    def test_value_grows_by_at_most_one_per_cycle(self, model, loss, cycles):
        shorter = expectimax_value(model, empty(model), explicit(cycles, loss))
        longer = expectimax_value(model, empty(model), explicit(cycles + 1, loss))
        assert shorter <= longer <= shorter + 1

    @settings(max_examples=50, deadline=None)
    @given(rational_tables(), rational_tables(), losses, st.integers(1, 3))
    def test_repeated_decisions_agree(self, first, second, loss, cycles):
        xi = MixtureModel(ModelClass([first, second]))
        cfg = explicit(cycles, loss)
        for model in (first, xi):
            assert select_action(model, empty(model), cfg) == select_action(model, empty(model), cfg)


class TestSubstitution:
    @pytest.mark.parametrize("cycles", [1, 2, 3])
    @pytest.mark.parametrize("family", [action_dependent_sources, sticky_families], ids=["order0", "order1"])
    def test_single_member_mixture_plans_like_its_member(self, family, cycles):
        for loss in (ZERO_ONE, ASYMMETRIC):
            cfg = explicit(cycles, loss)
            for mu in family(GRID):
                xi = MixtureModel(ModelClass([mu]))
                assert select_action(xi, empty(xi), cfg) == select_action(mu, empty(mu), cfg)
                assert expectimax_value(xi, empty(xi), cfg) == expectimax_value(mu, empty(mu), cfg)
                if cycles > 1:
                    h_mu = reachable_tape(mu, [(1, 1)])
                    h_xi = reachable_tape(xi, [(1, 1)])
                    assert select_action(xi, h_xi, cfg) == select_action(mu, h_mu, cfg)


class TestValueIteration:
    def test_single_state(self):
        mdp = make_mdp([[["1"], ["1"]]], ["1"])
        loss = MatrixLoss([["1/5", "1/2"]])
        table = value_iteration_mdp(mdp, loss, 3)
        assert table.root_value == pytest.approx(0.6)
        assert expectimax_value(mdp, empty(mdp), explicit(3, loss)) == Fraction(3, 5)

    def test_zero_horizon(self):
        mdp = make_mdp([[[1.0, 0.0], [0.0, 1.0]], [[0.5, 0.5], [0.5, 0.5]]], [0.5, 0.5])
        table = value_iteration_mdp(mdp, MatrixLoss.zero_one(), 0)
        assert table.root_value == 0
        assert np.all(table.values == 0)

    @pytest.mark.parametrize("memoize", [False, True])
    def test_random_mdp_crosscheck(self, memoize):
        rng = np.random.default_rng(7)
        mdp = random_mdp(rng, 3, 2)
        loss = MatrixLoss(rng.uniform(size=(3, 2)).tolist())
        table = value_iteration_mdp(mdp, loss, 4)
        result = select_action(mdp, empty(mdp), explicit(4, loss, memoize=memoize))
        assert float(result.value) == pytest.approx(table.root_value, abs=1e-9)
        assert np.allclose([float(v) for v in result.action_values], table.root_action_values, atol=1e-9)

    def test_mdp_and_its_table_plan_alike(self):
        rng = np.random.default_rng(11)
        mdp = random_mdp(rng, 3, 2)
        table = mdp.as_table()
        loss = MatrixLoss(rng.uniform(size=(3, 2)).tolist())
        for cycles in (1, 2, 3):
            cfg = explicit(cycles, loss)
            assert select_action(table, empty(table), cfg) == select_action(mdp, empty(mdp), cfg)


class TestGreedyReduction:
    def test_holds_for_bernoulli(self):
        model = make_bernoulli("7/10")
        assert greedy_reduction_check(model, ZERO_ONE, explicit(4))

    def test_holds_under_asymmetric_loss(self):
        model = make_bernoulli("3/5")
        assert greedy_reduction_check(model, ASYMMETRIC, explicit(4, ASYMMETRIC))

    def test_holds_for_a_mixture(self):
        xi = MixtureModel(ModelClass([make_bernoulli(0.2), make_bernoulli(0.6)]))
        assert greedy_reduction_check(xi, MatrixLoss.zero_one(), explicit(4, MatrixLoss.zero_one()))

    def test_not_applicable_to_bandits(self):
        bandit = make_bandit([0.2, 0.8], embed_loss=False)
        with pytest.raises(NotApplicableError):
            greedy_reduction_check(bandit, MatrixLoss.bandit(2), explicit(2, MatrixLoss.bandit(2)))
