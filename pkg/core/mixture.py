"""
Bayesian mixture xi over a finite, explicitly enumerated model class.

Weights are kept in log-space; members that assign probability zero to an
observed percept keep their slot with log-weight -inf.
"""

from typing import Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.special import logsumexp

from core.environment import Actions, EnvironmentModel, Percepts, log_probability
from core.numeric import Probability
from core.errors import (
    AlphabetMismatchError,
    ClassExhaustedError,
    ConfigError,
    EmptyClassError,
    ModelInvalidError,
    ShapeError,
    UnreachableHistoryError,
)
from core.history import ActionSymbol, PerceptSymbol

logger = logging.getLogger(__name__)

WEIGHT_SCHEMES = ("uniform", "prefix-code")

# Slack accepted on sum(w) = 1 for explicit weights
WEIGHT_TOLERANCE = 1e-12

# Slack used by dominance checks
DOMINANCE_SLACK = 1e-15


def prior_weights(descriptions: Sequence[str], scheme: str = "uniform") -> np.ndarray:
    """
    Prior weight vector for an ordered list of member descriptions.

    The prefix-code scheme weighs a member by 2^-L, L being the length in
    symbols of its canonical serialization, then normalises.

    Args:
        descriptions: Canonical serializations, one per member
        scheme: "uniform" or "prefix-code"

    Returns:
        Positive weights summing to one

    Raises:
        EmptyClassError: If there are no members
    """
    if len(descriptions) == 0:
        raise EmptyClassError("Cannot assign prior weights to an empty model class")
    if scheme == "uniform":
        return np.full(len(descriptions), 1.0 / len(descriptions))
    if scheme == "prefix-code":
        lengths = np.array([len(d) for d in descriptions], dtype=float)
        log_w = -lengths * math.log(2.0)
        return np.exp(log_w - logsumexp(log_w))
    raise ConfigError(f"Unknown weight scheme: {scheme}")


class ModelClass:
    """Ordered finite model class {(w_i, mu_i)}."""

    def __init__(
        self,
        members: Sequence[EnvironmentModel],
        weights: Optional[Sequence[float]] = None,
        names: Optional[Sequence[str]] = None,
        weight_tolerance: float = WEIGHT_TOLERANCE
    ):
        """
        Initialize a model class.

        Args:
            members: Environments sharing identical alphabets
            weights: Prior weights (uniform when omitted)
            names: Labels used in reports (member names when omitted)
            weight_tolerance: Slack accepted on sum(w) = 1
        """
        if len(members) == 0:
            raise EmptyClassError("Model class needs at least one member")
        first = members[0]
        for member in members[1:]:
            if (member.action_alphabet.size, member.observation_alphabet.size) != (
                first.action_alphabet.size, first.observation_alphabet.size
            ) or (member.loss_alphabet is None) != (first.loss_alphabet is None) or (
                member.loss_alphabet is not None and member.loss_alphabet.size != first.loss_alphabet.size
            ):
                raise AlphabetMismatchError(f"Member {member.name} does not share the alphabets of {first.name}")
        if weights is None:
            weights = prior_weights([m.canonical_serialization() for m in members], "uniform")
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(members),):
            raise ShapeError(f"Got {weights.shape[0]} weights for {len(members)} members")
        if np.any(weights <= 0):
            raise ModelInvalidError("Prior weights must be strictly positive")
        if abs(float(np.sum(weights)) - 1.0) > weight_tolerance:
            raise ModelInvalidError(f"Prior weights sum to {float(np.sum(weights))}, not 1")
        self.members: Tuple[EnvironmentModel, ...] = tuple(members)
        self.weights = weights
        self.log_weights = np.log(weights)
        self.names: Tuple[str, ...] = tuple(names) if names else tuple(m.name for m in members)

    @classmethod
    def from_members(
        cls,
        members: Sequence[EnvironmentModel],
        scheme: str = "uniform",
        explicit_weights: Optional[Sequence[float]] = None,
        names: Optional[Sequence[str]] = None,
        weight_tolerance: float = WEIGHT_TOLERANCE
    ) -> "ModelClass":
        """Build a class with weights from a scheme or an explicit vector."""
        if explicit_weights is not None:
            weights = np.asarray(explicit_weights, dtype=float)
            weights = weights / weights.sum()
        else:
            weights = prior_weights([m.canonical_serialization() for m in members], scheme)
        return cls(members, weights, names, weight_tolerance)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, index: int) -> EnvironmentModel:
        return self.members[index]

    def index_of(self, model: EnvironmentModel) -> Optional[int]:
        """Index of the member with the same canonical serialization, if any."""
        target = model.canonical_serialization()
        for i, member in enumerate(self.members):
            if member.canonical_serialization() == target:
                return i
        return None


class MixtureModel(EnvironmentModel):
    """
    xi(x_{1:n}|y_{1:n}) = sum_i w_i mu_i(x_{1:n}|y_{1:n}) with posterior state.

    The instance is immutable: ``posterior_update`` returns a new mixture
    conditioned on one more cycle.
    """

    kind = "mixture"

    def __init__(
        self,
        model_class: ModelClass,
        log_weights: Optional[np.ndarray] = None,
        percepts: Percepts = (),
        actions: Actions = ()
    ):
        first = model_class[0]
        super().__init__(first.action_alphabet, first.observation_alphabet, first.loss_alphabet, name="mixture")
        self.model_class = model_class
        self.log_weights = model_class.log_weights.copy() if log_weights is None else log_weights
        self.percepts: Percepts = tuple(percepts)
        self.actions: Actions = tuple(actions)
        self.action_independent = all(m.action_independent for m in model_class)

    @property
    def posterior_weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def history_length(self) -> int:
        return len(self.percepts)

    def canonical_serialization(self) -> str:
        return "mixture(" + ";".join(m.canonical_serialization() for m in self.model_class) + ")"

    # ------------------------------------------------------------------
    # Posterior
    # ------------------------------------------------------------------

    def _bayes_step(self, log_weights: np.ndarray, percepts: Percepts, actions: Actions, x: PerceptSymbol) -> np.ndarray:
        """One log-space Bayes update on views (x_{<t}, y_{1:t}) observing x."""
        index = self.percept_index(x)
        updated = np.full_like(log_weights, -np.inf)
        for i, member in enumerate(self.model_class.members):
            if log_weights[i] == -np.inf:
                continue
            p = member.step_distribution(percepts, actions)[index]
            updated[i] = log_weights[i] + log_probability(p)
        if np.all(updated == -np.inf):
            raise ClassExhaustedError(f"Every member assigns probability 0 to percept {x} at cycle {len(percepts) + 1}")
        return updated - logsumexp(updated)

    def posterior_update(self, y: ActionSymbol, x: PerceptSymbol) -> "MixtureModel":
        """
        Condition on one more cycle (y, x).

        Args:
            y: Action of the cycle
            x: Observed percept

        Returns:
            New mixture whose posterior includes the cycle

        Raises:
            ClassExhaustedError: If every member assigns probability zero to x
        """
        actions = self.actions + (y,)
        log_weights = self._bayes_step(self.log_weights, self.percepts, actions, x)
        return MixtureModel(self.model_class, log_weights, self.percepts + (x,), actions)

    def advance(self, y, x):
        return self.posterior_update(y, x)

    def _posterior_for(self, percepts: Percepts, actions: Actions) -> np.ndarray:
        """
        Log posterior after the completed history (percepts, actions[:len(percepts)]).

        Continues from the current state when it is a prefix of the request,
        otherwise restarts from the prior.
        """
        n = len(percepts)
        past = actions[:n]
        k = len(self.percepts)
        if k <= n and percepts[:k] == self.percepts and past[:k] == self.actions:
            log_weights, start = self.log_weights, k
        else:
            log_weights, start = self.model_class.log_weights, 0
        for s in range(start, n):
            log_weights = self._bayes_step(log_weights, percepts[:s], past[:s + 1], percepts[s])
        return log_weights

    def condition_on(self, percepts, actions) -> "MixtureModel":
        percepts, actions = tuple(percepts), tuple(actions)
        if percepts == self.percepts and actions[:len(percepts)] == self.actions:
            return self
        try:
            log_weights = self._posterior_for(percepts, actions)
        except ClassExhaustedError as e:
            raise UnreachableHistoryError(str(e)) from e
        return MixtureModel(self.model_class, log_weights, percepts, actions[:len(percepts)])

    def ensure_reachable(self, percepts, actions):
        self.condition_on(percepts, actions)

    # ------------------------------------------------------------------
    # Law
    # ------------------------------------------------------------------

    def _mix(self, log_weights: np.ndarray, percepts: Percepts, actions: Actions) -> Tuple[Probability, ...]:
        active = np.flatnonzero(log_weights > -np.inf)
        if len(active) == 1:
            # normalised log-weight is exactly 0, so the member row is the mixture row
            return tuple(self.model_class[int(active[0])].step_distribution(percepts, actions))
        weights = np.exp(log_weights)
        row = [0.0] * len(self.percept_space)
        for i, member in enumerate(self.model_class.members):
            if log_weights[i] == -np.inf:
                continue
            w = float(weights[i])
            for j, p in enumerate(member.step_distribution(percepts, actions)):
                row[j] += w * float(p)
        return tuple(row)

    def step_distribution(self, percepts, actions):
        percepts, actions = tuple(percepts), tuple(actions)
        if percepts == self.percepts and actions[:-1] == self.actions:
            return self._mix(self.log_weights, percepts, actions)
        try:
            log_weights = self._posterior_for(percepts, actions)
        except ClassExhaustedError as e:
            raise UnreachableHistoryError(str(e)) from e
        return self._mix(log_weights, percepts, actions)

    def member_log_joint(self, i: int, percepts: Percepts, actions: Actions) -> float:
        member = self.model_class[i]
        total = 0.0
        for s, x in enumerate(percepts):
            p = member.step_distribution(percepts[:s], actions[:s + 1])[self.percept_index(x)]
            if p == 0:
                return -math.inf
            total += math.log(p)
        return total

    def mixture_joint(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol]) -> float:
        """
        xi(x_{1:n} | y_{1:n}) under the prior weights.

        Raises:
            ShapeError: If the sequences differ in length
        """
        percepts, actions = tuple(percepts), tuple(actions)
        if len(percepts) != len(actions):
            raise ShapeError(f"mixture_joint needs equal lengths, got {len(percepts)} and {len(actions)}")
        if not percepts:
            return 1.0
        terms = np.array([
            self.model_class.log_weights[i] + self.member_log_joint(i, percepts, actions)
            for i in range(len(self.model_class))
        ])
        if np.all(terms == -np.inf):
            return 0.0
        return float(np.exp(logsumexp(terms)))

    def joint(self, percepts, actions):
        return self.mixture_joint(percepts, actions)

    def mixture_conditional(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol], x: PerceptSymbol) -> float:
        """
        xi(x | x_{<t} y_{1:t}) = sum_i posterior_i mu_i(x | .).

        Raises:
            UnreachableHistoryError: If the conditioning history has mixture probability zero
        """
        percepts, actions = tuple(percepts), tuple(actions)
        self.check_views(percepts, actions)
        return self.step_distribution(percepts, actions)[self.percept_index(x)]

    def conditional(self, percepts, actions, x):
        return self.mixture_conditional(percepts, actions, x)

    def dominance_check(
        self,
        i: int,
        percepts: Sequence[PerceptSymbol],
        actions: Sequence[ActionSymbol],
        slack: float = DOMINANCE_SLACK
    ) -> bool:
        """
        Check xi(x_{1:n}|y_{1:n}) >= w_i mu_i(x_{1:n}|y_{1:n}).

        Args:
            i: Member index
            percepts: x_{1:n}
            actions: y_{1:n}
            slack: Absolute slack allowed for float rounding

        Returns:
            True when dominance holds up to the slack
        """
        if not 0 <= i < len(self.model_class):
            raise IndexError(f"Member index {i} outside class of size {len(self.model_class)}")
        percepts, actions = tuple(percepts), tuple(actions)
        xi = self.mixture_joint(percepts, actions)
        member = float(self.model_class.weights[i]) * math.exp(self.member_log_joint(i, percepts, actions))
        return xi >= member - slack

    def batch_posterior(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol]) -> np.ndarray:
        """Posterior weights proportional to w_i mu_i(x_{1:n}|y_{1:n}), computed in one pass."""
        percepts, actions = tuple(percepts), tuple(actions)
        terms = np.array([
            self.model_class.log_weights[i] + self.member_log_joint(i, percepts, actions)
            for i in range(len(self.model_class))
        ])
        if np.all(terms == -np.inf):
            raise ClassExhaustedError("History has probability 0 under every member")
        return np.exp(terms - logsumexp(terms))
