import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import (
    AlphabetMismatchError,
    ClassExhaustedError,
    ConfigError,
    EmptyClassError,
    ModelInvalidError,
    UnreachableHistoryError,
)
from core.mixture import MixtureModel, ModelClass, prior_weights
from plugins.bandit_plugin import make_bandit
from plugins.bernoulli_plugin import make_bernoulli
from plugins.table_plugin import TableEnvironment

from tests.conftest import A0, A1, X0, X1, actions, percepts


def half_and_ninety():
    return MixtureModel(ModelClass([make_bernoulli(0.5), make_bernoulli(0.9)], [0.5, 0.5]))


class TestPriorWeights:
    def test_uniform(self):
        assert np.allclose(prior_weights(["a", "b"]), [0.5, 0.5])
        assert np.allclose(prior_weights(["a", "b", "c", "d"]), [0.25] * 4)

    def test_prefix_code(self):
        assert np.allclose(prior_weights(["abc", "abcde"], "prefix-code"), [0.8, 0.2])

    def test_empty_class(self):
        with pytest.raises(EmptyClassError):
            prior_weights([])

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError):
            prior_weights(["a"], "solomonoff")


class TestModelClass:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ModelInvalidError):
            ModelClass([make_bernoulli(0.3), make_bernoulli(0.7)], [0.5, 0.6])

    def test_weights_must_be_positive(self):
        with pytest.raises(ModelInvalidError):
            ModelClass([make_bernoulli(0.3), make_bernoulli(0.7)], [1.0, 0.0])

    def test_members_share_alphabets(self):
        with pytest.raises(AlphabetMismatchError):
            ModelClass([make_bernoulli(0.3), make_bandit([0.2, 0.8])])

    def test_explicit_weights_are_normalised(self):
        model_class = ModelClass.from_members([make_bernoulli(0.3), make_bernoulli(0.7)], explicit_weights=[1, 3])
        assert np.allclose(model_class.weights, [0.25, 0.75])

    def test_index_of(self):
        model_class = ModelClass([make_bernoulli(0.3), make_bernoulli(0.7)])
        assert model_class.index_of(make_bernoulli(0.7)) == 1
        assert model_class.index_of(make_bernoulli(0.5)) is None


class TestMixtureLaw:
    def test_conditional_on_empty_history(self):
        assert half_and_ninety().conditional((), (A0,), X1) == pytest.approx(0.7)

    def test_conditional_after_one_observation(self):
        xi = half_and_ninety()
        assert xi.conditional(percepts(1), actions(0, 0), X1) == pytest.approx(0.53 / 0.7, abs=1e-12)

    def test_joint(self):
        xi = half_and_ninety()
        assert xi.joint((), ()) == 1
        assert xi.joint(percepts(1), actions(0)) == pytest.approx(0.7)
        assert xi.joint(percepts(1, 1), actions(0, 0)) == pytest.approx(0.53)

    def test_conditional_matches_ratio_of_joints(self):
        xi = half_and_ninety()
        xs, ys = percepts(1, 0, 1), actions(0, 0, 0)
        ratio = xi.joint(xs, ys) / xi.joint(xs[:2], ys[:2])
        assert xi.conditional(xs[:2], ys, X1) == pytest.approx(ratio, rel=1e-12)

    def test_unreachable_history(self):
        xi = MixtureModel(ModelClass([make_bernoulli(0)]))
        with pytest.raises(UnreachableHistoryError):
            xi.conditional(percepts(1), actions(0, 0), X1)

    def test_mixture_is_action_independent_when_members_are(self):
        assert half_and_ninety().action_independent
        bandits = ModelClass([make_bandit([0.2, 0.8]), make_bandit([0.8, 0.2])])
        assert not MixtureModel(bandits).action_independent


class TestPosterior:
    def test_one_step_update(self):
        posterior = half_and_ninety().posterior_update(A0, X1).posterior_weights
        assert np.allclose(posterior, [0.25 / 0.7, 0.45 / 0.7], atol=1e-12)

    def test_identical_likelihoods_leave_posterior_unchanged(self):
        table = [[0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.9, 0.1], [0.1, 0.9]]
        first = TableEnvironment(1, table, 2, 2, name="first")
        second = TableEnvironment(1, table[:4] + [[0.9, 0.1], [0.3, 0.7]], 2, 2, name="second")
        xi = MixtureModel(ModelClass([first, second], [0.3, 0.7]))
        # the members differ only on the first-cycle row for action 1
        after = xi.posterior_update(A0, X0).posterior_update(A1, X1)
        assert np.allclose(after.posterior_weights, [0.3, 0.7])

    def test_zero_likelihood_member_drops_out(self):
        xi = MixtureModel(ModelClass([make_bernoulli(0), make_bernoulli(0.5)], [0.5, 0.5]))
        after = xi.posterior_update(A0, X1)
        assert after.posterior_weights[0] == 0
        assert after.posterior_weights[1] == 1

    def test_exhausted_class(self):
        xi = MixtureModel(ModelClass([make_bernoulli(0)]))
        with pytest.raises(ClassExhaustedError):
            xi.posterior_update(A0, X1)

    def test_update_returns_new_mixture(self):
        xi = half_and_ninety()
        xi.posterior_update(A0, X1)
        assert np.allclose(xi.posterior_weights, [0.5, 0.5])

    def test_incremental_matches_batch(self):
        xi = half_and_ninety()
        xs = percepts(1, 1, 0, 1, 0, 0, 1)
        ys = actions(*([0] * len(xs)))
        stepped = xi
        for y, x in zip(ys, xs):
            stepped = stepped.advance(y, x)
        assert np.allclose(stepped.posterior_weights, xi.batch_posterior(xs, ys), atol=1e-12)

    @pytest.mark.parametrize("length", range(6))
    def test_incremental_matches_batch_on_every_sequence(self, length):
        members = [make_bernoulli(0.1), make_bernoulli(0.5), make_bernoulli(0.9), make_bernoulli(1)]
        xi = MixtureModel(ModelClass(members, [0.1, 0.2, 0.3, 0.4]))
        for xs in product((X0, X1), repeat=length):
            ys = actions(*([0] * length))
            try:
                batch = xi.batch_posterior(xs, ys)
            except ClassExhaustedError:
                continue
            stepped = xi
            for y, x in zip(ys, xs):
                stepped = stepped.advance(y, x)
            assert np.allclose(stepped.posterior_weights, batch, rtol=0, atol=1e-10)
            assert np.allclose(xi.condition_on(xs, ys).posterior_weights, batch, rtol=0, atol=1e-10)


class TestDominance:
    def test_single_member_equality(self):
        xi = MixtureModel(ModelClass([make_bernoulli(0.3)]))
        xs, ys = percepts(1, 0, 0), actions(0, 0, 0)
        assert xi.joint(xs, ys) == pytest.approx(make_bernoulli(0.3).joint(xs, ys))
        assert xi.dominance_check(0, xs, ys)

    def test_member_index_out_of_range(self):
        with pytest.raises(IndexError):
            half_and_ninety().dominance_check(2, (), ())


@st.composite
def bernoulli_classes(draw):
    size = draw(st.integers(min_value=1, max_value=5))
    params = draw(st.lists(st.sampled_from([0, 0.1, 0.25, 0.5, 0.75, 0.9, 1]), min_size=size, max_size=size, unique=True))
    raw = draw(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=size, max_size=size))
    return ModelClass.from_members([make_bernoulli(p) for p in params], explicit_weights=raw)


@st.composite
def action_dependent_classes(draw):
    size = draw(st.integers(min_value=1, max_value=4))
    members = []
    for i in range(size):
        a = Fraction(draw(st.integers(0, 4)), 4)
        b = Fraction(draw(st.integers(0, 4)), 4)
        members.append(TableEnvironment(0, [[1 - a, a], [1 - b, b]], 2, 2, name=f"m{i}"))
    raw = draw(st.lists(st.floats(min_value=0.05, max_value=1.0), min_size=size, max_size=size))
    return ModelClass.from_members(members, explicit_weights=raw)


@pytest.mark.property
class TestMixtureProperties:
    @settings(max_examples=1000, deadline=None)
    @given(bernoulli_classes(), st.lists(st.integers(0, 1), min_size=0, max_size=6), st.data())
    def test_dominance_holds(self, model_class, bits, data):
        xi = MixtureModel(model_class)
        i = data.draw(st.integers(0, len(model_class) - 1))
        assert xi.dominance_check(i, percepts(*bits), actions(*([0] * len(bits))))

    @settings(max_examples=1000, deadline=None)
    @given(action_dependent_classes(), st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=6), st.data())
    def test_dominance_holds_with_actions(self, model_class, cycles, data):
        xi = MixtureModel(model_class)
        i = data.draw(st.integers(0, len(model_class) - 1))
        ys = actions(*[y for y, _ in cycles])
        xs = percepts(*[x for _, x in cycles])
        assert xi.dominance_check(i, xs, ys)

    @settings(max_examples=100, deadline=None)
    @given(bernoulli_classes(), st.lists(st.integers(0, 1), max_size=6))
    def test_conditional_rows_normalise(self, model_class, bits):
        xi = MixtureModel(model_class)
        xs = percepts(*bits)
        ys = actions(*([0] * (len(bits) + 1)))
        try:
            row = xi.step_distribution(xs, ys)
        except UnreachableHistoryError:
            return
        assert math.isclose(sum(row), 1.0, abs_tol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(bernoulli_classes(), st.lists(st.integers(0, 1), min_size=1, max_size=6))
    def test_posterior_weights_stay_normalised(self, model_class, bits):
        xi = MixtureModel(model_class)
        try:
            for b in bits:
                xi = xi.advance(A0, X1 if b else X0)
        except ClassExhaustedError:
            return
        weights = xi.posterior_weights
        assert np.all(weights >= 0)
        assert math.isclose(float(weights.sum()), 1.0, abs_tol=1e-12)


@pytest.mark.slow
def test_dominance_sweep():
    rng = np.random.default_rng(2024)
    grid = [Fraction(k, 4) for k in range(5)]
    for _ in range(10_000):
        size = int(rng.integers(1, 5))
        members = []
        for i in range(size):
            a, b = (grid[int(k)] for k in rng.integers(0, 5, size=2))
            members.append(TableEnvironment(0, [[1 - a, a], [1 - b, b]], 2, 2, name=f"m{i}"))
        xi = MixtureModel(ModelClass.from_members(members, explicit_weights=rng.uniform(0.05, 1.0, size=size).tolist()))
        length = int(rng.integers(0, 9))
        xs = percepts(*rng.integers(0, 2, size=length).tolist())
        ys = actions(*rng.integers(0, 2, size=length).tolist())
        for i in range(size):
            assert xi.dominance_check(i, xs, ys)
