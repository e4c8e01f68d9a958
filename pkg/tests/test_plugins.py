from fractions import Fraction
import os

import numpy as np
import pytest

from core.errors import ConfigError, EmptyClassError, ModelInvalidError, NormalizationError, RangeError, ShapeError
from core.history import PerceptSymbol
from core.plugin_manager import PluginManager
from plugins.bandit_plugin import make_bandit
from plugins.bernoulli_plugin import make_bernoulli
from plugins.mdp_plugin import make_mdp
from plugins.table_plugin import TablePlugin, make_table

from tests.conftest import A0, A1, X0, X1, actions, percepts

FLIP_STAY = [
    [[1, 0], [0, 1]],  # state 0: stay, flip
    [[0, 1], [1, 0]],  # state 1: stay, flip
]


class TestBernoulli:
    def test_conditional_is_p_everywhere(self):
        source = make_bernoulli(0.7)
        assert source.conditional((), (A0,), X1) == 0.7
        assert source.conditional(percepts(0, 1), actions(1, 0, 1), X1) == 0.7

    def test_deterministic_zero(self):
        source = make_bernoulli(0)
        assert source.conditional((), (A1,), X0) == 1

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            make_bernoulli(1.1)

    def test_serialization(self):
        assert make_bernoulli("3/4").canonical_serialization() == "B3/4"

    def test_action_invariance_on_random_histories(self):
        source = make_bernoulli(0.3)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            length = int(rng.integers(0, 8))
            xs = tuple(PerceptSymbol(int(b)) for b in rng.integers(0, 2, size=length))
            ys = actions(*rng.integers(0, 2, size=length).tolist())
            rows = {source.step_distribution(xs, ys + (y,)) for y in source.action_space}
            assert len(rows) == 1


class TestBandit:
    def test_degenerate_arms(self):
        bandit = make_bandit([0, 1])
        assert bandit.conditional((), (A0,), PerceptSymbol(0, 0)) == 1
        assert bandit.conditional((), (A1,), PerceptSymbol(1, 1)) == 1

    def test_loss_level_mirrors_observation(self):
        bandit = make_bandit([0.2, 0.8])
        assert bandit.conditional((), (A1,), PerceptSymbol(1, 1)) == 0.8
        assert bandit.conditional((), (A1,), PerceptSymbol(1, 0)) == 0

    def test_best_arm(self):
        assert make_bandit(["3/4", "1/4", "1/4"]).best_arm == 1

    def test_no_arms(self):
        with pytest.raises(ShapeError):
            make_bandit([])

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            make_bandit([0.2, 1.5])

    @pytest.mark.slow
    def test_empirical_loss_frequency(self):
        bandit = make_bandit([0.2, 0.8])
        rng = np.random.default_rng(0)
        for arm, p in enumerate(bandit.loss_probs):
            pulls = [bandit.sample_next((), actions(arm), rng).loss_level for _ in range(100_000)]
            assert np.mean(pulls) == pytest.approx(p, abs=0.01)


class TestMdp:
    def test_identity_transitions(self):
        mdp = make_mdp([[[1, 0], [1, 0]], [[0, 1], [0, 1]]], [0.5, 0.5])
        for y in (A0, A1):
            assert mdp.conditional(percepts(1), (A0, y), X1) == 1

    def test_flip(self):
        mdp = make_mdp(FLIP_STAY, [1, 0])
        assert mdp.conditional(percepts(0), actions(0, 1), X1) == 1
        assert mdp.conditional(percepts(0), actions(0, 0), X0) == 1

    def test_first_percept_uses_initial(self):
        mdp = make_mdp(FLIP_STAY, ["1/4", "3/4"])
        assert mdp.conditional((), (A1,), X1) == Fraction(3, 4)

    def test_rows_must_normalise(self):
        with pytest.raises(NormalizationError):
            make_mdp([[[0.5, 0.4], [1, 0]], [[0, 1], [0, 1]]], [1, 0])

    def test_ragged_tensor(self):
        with pytest.raises(ShapeError):
            make_mdp([[[1, 0], [1, 0]], [[0, 1]]], [1, 0])


class TestTable:
    def test_rows_follow_context_and_action(self):
        # order 1 over binary percepts: contexts 0, 1 and the start marker 2
        rows = [[1, 0], [0, 1], [0, 1], [1, 0], ["1/2", "1/2"], ["1/2", "1/2"]]
        table = make_table(1, rows)
        assert table.conditional((), (A0,), X1) == Fraction(1, 2)
        assert table.conditional(percepts(0), actions(0, 1), X1) == 1
        assert table.conditional(percepts(1), actions(0, 1), X0) == 1

    def test_wrong_row_count(self):
        with pytest.raises(ShapeError):
            make_table(1, [[1, 0], [0, 1]])


class TestPluginManager:
    def test_build_every_registered_kind(self, manager):
        assert manager.load_all_plugins() == ["bandit", "bernoulli", "custom-table", "mdp"]

    def test_build_from_entry(self, manager):
        env = manager.build_environment({"kind": "bernoulli", "p": "7/10"})
        assert env.canonical_serialization() == "B7/10"

    def test_unknown_kind(self, manager):
        with pytest.raises(ConfigError):
            manager.build_environment({"kind": "maze"})

    def test_missing_kind(self, manager):
        with pytest.raises(ConfigError):
            manager.build_environment({"p": 0.5})

    def test_missing_field(self, manager):
        with pytest.raises(ConfigError):
            manager.build_environment({"kind": "bandit"})

    def test_invalid_entry_is_validated(self, manager):
        with pytest.raises(NormalizationError):
            manager.build_environment({"kind": "mdp", "transitions": [[[0.9]]], "initial": [1]})

    def test_table_action_independence_flag(self, manager):
        rows = [["3/10", "7/10"], ["3/10", "7/10"]]
        env = manager.build_environment({"kind": "custom-table", "order": 0, "rows": rows, "action_independent": True})
        assert env.action_independent
        assert not manager.build_environment({"kind": "custom-table", "order": 0, "rows": rows}).action_independent
        member = TablePlugin().build_grid_member(rows, {"order": 0, "action_independent": True})
        assert member.action_independent

    def test_false_table_action_independence_claim(self, manager):
        entry = {"kind": "custom-table", "order": 0, "rows": [[1, 0], [0, 1]], "action_independent": True}
        with pytest.raises(ModelInvalidError):
            manager.build_environment(entry)

    def test_two_point_grid(self, manager):
        model_class = manager.make_grid_class("bernoulli", [0.3, 0.7])
        assert len(model_class) == 2
        assert np.allclose(model_class.weights, [0.5, 0.5])

    def test_nine_point_grid(self, manager):
        model_class = manager.make_grid_class("bernoulli", [k / 10 for k in range(1, 10)], scheme="prefix-code")
        assert len(model_class) == 9
        assert float(np.sum(model_class.weights)) == pytest.approx(1.0, abs=1e-12)

    def test_grid_contains_truth(self, manager):
        model_class = manager.make_grid_class("bernoulli", [0.1, 0.3, 0.5, 0.7, 0.9])
        assert model_class.index_of(make_bernoulli(0.7)) == 3

    def test_empty_grid(self, manager):
        with pytest.raises(EmptyClassError):
            manager.make_grid_class("bernoulli", [])

    def test_duplicate_grid_values(self, manager):
        with pytest.raises(ConfigError):
            manager.make_grid_class("bernoulli", [0.5, 0.5])

    def test_bandit_grid(self, manager):
        model_class = manager.build_class({"kind": "bandit", "grid": [[0.2, 0.8], [0.8, 0.2]]})
        assert all(member.embeds_loss for member in model_class)

    def test_class_from_member_entries(self, manager):
        model_class = manager.build_class({
            "members": [{"kind": "bernoulli", "p": 0.2}, {"kind": "bernoulli", "p": 0.6}],
            "weights": [1, 3],
        })
        assert np.allclose(model_class.weights, [0.25, 0.75])

    def test_class_section_needs_grid_or_members(self, manager):
        with pytest.raises(ConfigError):
            manager.build_class({"kind": "bernoulli"})

    def test_custom_plugin_directory(self, tmp_path):
        (tmp_path / "bernoulli.yaml").write_text("module_path: plugins.bernoulli_plugin\nclass_name: Missing\n")
        manager = PluginManager(plugin_config_dir=str(tmp_path))
        with pytest.raises(ConfigError):
            manager.load_plugin("bernoulli")
        assert os.path.isdir(manager.plugin_config_dir)
