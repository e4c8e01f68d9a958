from typing import Any, Dict, Sequence
import logging

import numpy as np

from core.environment import EnvironmentModel
from core.errors import NormalizationError, ShapeError
from core.history import Alphabet
from core.numeric import NORMALIZATION_TOLERANCE, Probability, format_number, is_normalized
from plugins.base_plugin import EnvironmentPlugin, probability_vector
from plugins.table_plugin import TableEnvironment

logger = logging.getLogger(__name__)


class MdpEnvironment(EnvironmentModel):
    """
    Fully observable MDP: the percept is the state.

    The first percept is drawn from ``initial``; afterwards
    mu(x_t | x_{<t} y_{1:t}) = transitions[x_{t-1}][y_t][x_t].
    """

    kind = "mdp"
    context_length = 1

    def __init__(
        self,
        transitions: Sequence[Sequence[Sequence[Probability]]],
        initial: Sequence[Probability],
        name: str = ""
    ):
        n_states = len(transitions)
        if n_states == 0 or len(initial) != n_states:
            raise ShapeError(f"MDP needs a non-empty transition tensor and an initial row of the same size")
        n_actions = len(transitions[0])
        if n_actions == 0:
            raise ShapeError("MDP needs at least one action")
        for s, per_action in enumerate(transitions):
            if len(per_action) != n_actions:
                raise ShapeError(f"State {s} has {len(per_action)} actions, expected {n_actions}")
            for y, row in enumerate(per_action):
                if len(row) != n_states:
                    raise ShapeError(f"Row ({s}, {y}) has {len(row)} entries, expected {n_states}")
                if not is_normalized(row, NORMALIZATION_TOLERANCE):
                    raise NormalizationError(f"Transition row ({s}, {y}) sums to {float(sum(row))}")
        if not is_normalized(initial, NORMALIZATION_TOLERANCE):
            raise NormalizationError(f"Initial distribution sums to {float(sum(initial))}")
        super().__init__(Alphabet(n_actions, name="actions"), Alphabet(n_states, name="states"), name=name or "mdp")
        self.transitions = tuple(tuple(tuple(row) for row in per_action) for per_action in transitions)
        self.initial = tuple(initial)

    @property
    def n_states(self) -> int:
        return self.observation_alphabet.size

    @property
    def n_actions(self) -> int:
        return self.action_alphabet.size

    def transition_array(self) -> np.ndarray:
        """Float tensor T[s, y, s']."""
        return np.array([[[float(p) for p in row] for row in per_action] for per_action in self.transitions])

    def initial_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.initial])

    def as_table(self) -> TableEnvironment:
        """
        The same law as a generic order-1 context table.

        Context s holds the rows T[s][y]; the start context holds ``initial``
        for every action.
        """
        rows = [self.transitions[s][y] for s in range(self.n_states) for y in range(self.n_actions)]
        rows += [self.initial] * self.n_actions
        return TableEnvironment(1, rows, self.n_states, self.n_actions, name=f"table({self.name})")

    def step_distribution(self, percepts, actions):
        if not percepts:
            return self.initial
        return self.transitions[percepts[-1].observation][actions[-1].index]

    def canonical_serialization(self) -> str:
        body = "|".join(
            ";".join(",".join(format_number(p) for p in row) for row in per_action)
            for per_action in self.transitions
        )
        return f"M[{','.join(format_number(p) for p in self.initial)}]{body}"


def make_mdp(transitions: Sequence[Sequence[Sequence[Any]]], initial: Sequence[Any], name: str = "") -> MdpEnvironment:
    """
    MDP from a transition tensor indexed [state][action][next state].

    Args:
        transitions: Transition rows, one per (state, action)
        initial: Distribution of the first state

    Raises:
        NormalizationError: If a row does not sum to one
        RangeError: If an entry is outside [0, 1]
    """
    parsed = [[probability_vector(row) for row in per_action] for per_action in transitions]
    return MdpEnvironment(parsed, probability_vector(initial), name)


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int) -> MdpEnvironment:
    """Random MDP with Dirichlet(1) rows, used by the Bellman cross-check."""
    tensor = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    initial = rng.dirichlet(np.ones(n_states))
    # renormalise in float so that rows pass the exact 1e-12 check
    tensor = tensor / tensor.sum(axis=-1, keepdims=True)
    initial = initial / initial.sum()
    return MdpEnvironment(tensor.tolist(), initial.tolist(), name=f"mdp{n_states}x{n_actions}")


class MdpPlugin(EnvironmentPlugin):
    """Plugin for finite MDPs."""

    @property
    def name(self) -> str:
        return "mdp"

    @property
    def description(self) -> str:
        return "Finite MDP with transition tensor mu(x_t | x_{t-1}, y_t) and an initial state distribution"

    @property
    def required_fields(self):
        return ["transitions", "initial"]

    def build(self, entry: Dict[str, Any]) -> EnvironmentModel:
        self.check_entry(entry)
        return make_mdp(entry["transitions"], entry["initial"], entry.get("name", ""))

    def build_grid_member(self, point: Any, entry: Dict[str, Any]) -> EnvironmentModel:
        return make_mdp(point["transitions"], point["initial"])
