"""
Chronological environment models mu(x_t | x_{<t} y_{1:t}).

An environment exposes its law over a fixed, ordered percept space. The
hot paths (planner recursion, simulation loops) call ``step_distribution``
and keep reachability incrementally; the public ``conditional`` / ``joint``
operations validate their inputs.
"""

from abc import ABC, abstractmethod
from itertools import product as cartesian
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from core.errors import (
    AlphabetMismatchError,
    HistoryIndexError,
    ModelInvalidError,
    NormalizationError,
    RangeError,
    ShapeError,
    UnreachableHistoryError,
)
from core.history import ActionSymbol, Alphabet, HistoryTape, LossAlphabet, PerceptSymbol
from core.loss import LossSpec
from core.numeric import (
    NORMALIZATION_TOLERANCE,
    Probability,
    accumulate,
    in_unit_interval,
    is_normalized,
    product,
)

logger = logging.getLogger(__name__)

Percepts = Tuple[PerceptSymbol, ...]
Actions = Tuple[ActionSymbol, ...]

# Sampling accepts rows that are normalised up to this slack
SAMPLING_TOLERANCE = 1e-9


class EnvironmentModel(ABC):
    """Abstract chronological environment over finite alphabets."""

    kind = "custom"
    # Trailing percepts the law depends on; None means the whole history
    context_length: Optional[int] = None
    # Declared independence of the law from all actions
    action_independent = False

    def __init__(
        self,
        action_alphabet: Alphabet,
        observation_alphabet: Alphabet,
        loss_alphabet: Optional[LossAlphabet] = None,
        name: str = ""
    ):
        self.action_alphabet = action_alphabet
        self.observation_alphabet = observation_alphabet
        self.loss_alphabet = loss_alphabet
        self.name = name or self.kind
        if loss_alphabet is None:
            space = [PerceptSymbol(o) for o in observation_alphabet.symbols]
        else:
            space = [PerceptSymbol(o, l) for o in observation_alphabet.symbols for l in loss_alphabet.symbols]
        self._percept_space: Tuple[PerceptSymbol, ...] = tuple(space)
        self._percept_index: Dict[PerceptSymbol, int] = {x: i for i, x in enumerate(space)}
        self._action_space: Tuple[ActionSymbol, ...] = tuple(ActionSymbol(i) for i in action_alphabet.symbols)

    # ------------------------------------------------------------------
    # Law
    # ------------------------------------------------------------------

    @abstractmethod
    def step_distribution(self, percepts: Percepts, actions: Actions) -> Tuple[Probability, ...]:
        """
        Law of x_t over ``percept_space`` given x_{<t} and y_{1:t}.

        No reachability check is performed here.

        Args:
            percepts: x_{<t} (t-1 percepts)
            actions: y_{1:t} (t actions)

        Returns:
            One probability per percept in ``percept_space``
        """

    @abstractmethod
    def canonical_serialization(self) -> str:
        """Canonical text form used for prefix-code prior weights."""

    def describe(self) -> dict:
        return {"kind": self.kind, "name": self.name, "serialization": self.canonical_serialization()}

    @property
    def percept_space(self) -> Tuple[PerceptSymbol, ...]:
        return self._percept_space

    @property
    def action_space(self) -> Tuple[ActionSymbol, ...]:
        return self._action_space

    @property
    def embeds_loss(self) -> bool:
        return self.loss_alphabet is not None

    def percept_index(self, x: PerceptSymbol) -> int:
        try:
            return self._percept_index[x]
        except KeyError:
            raise AlphabetMismatchError(f"Percept {x} is not in the percept space of {self.name}") from None

    def step_items(self, percepts: Percepts, actions: Actions) -> Iterator[Tuple[PerceptSymbol, Probability]]:
        """Percepts with non-zero probability, in percept-space order."""
        for x, p in zip(self._percept_space, self.step_distribution(percepts, actions)):
            if p != 0:
                yield x, p

    # ------------------------------------------------------------------
    # Snapshots (stateful models such as mixtures override these)
    # ------------------------------------------------------------------

    def advance(self, y: ActionSymbol, x: PerceptSymbol) -> "EnvironmentModel":
        """Model conditioned on one more cycle; stateless models return themselves."""
        return self

    def condition_on(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol]) -> "EnvironmentModel":
        """
        Model snapshot for a completed history.

        Raises:
            UnreachableHistoryError: If the history has probability zero
        """
        self.ensure_reachable(tuple(percepts), tuple(actions))
        return self

    # ------------------------------------------------------------------
    # Validated operations
    # ------------------------------------------------------------------

    def check_views(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol]) -> None:
        """Raise unless the views hold t-1 percepts and t actions from the alphabets."""
        if len(actions) != len(percepts) + 1:
            raise ShapeError(f"Views need t actions and t-1 percepts, got {len(actions)} and {len(percepts)}")
        for y in actions:
            if not self.action_alphabet.contains(y.index):
                raise AlphabetMismatchError(f"Action {y.index} outside action alphabet of {self.name}")
        for x in percepts:
            self.percept_index(x)

    def ensure_reachable(self, percepts: Percepts, actions: Actions) -> None:
        """
        Check that every prefix of a completed history has positive probability.

        Args:
            percepts: x_{1:s}
            actions: y_{1:s} (or longer; extra actions are ignored)

        Raises:
            UnreachableHistoryError: On the first zero-probability percept
        """
        for s, x in enumerate(percepts):
            p = self.step_distribution(percepts[:s], actions[:s + 1])[self.percept_index(x)]
            if p == 0:
                raise UnreachableHistoryError(f"Percept {x} at cycle {s + 1} has probability 0 under {self.name}")

    def conditional(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol], x: PerceptSymbol) -> Probability:
        """
        mu(x | x_{<t} y_{1:t}).

        Args:
            percepts: x_{<t}
            actions: y_{1:t}
            x: Percept whose probability is requested

        Returns:
            Conditional probability in [0, 1]

        Raises:
            UnreachableHistoryError: If the conditioning history has probability zero
        """
        percepts, actions = tuple(percepts), tuple(actions)
        self.check_views(percepts, actions)
        self.ensure_reachable(percepts, actions)
        return self.step_distribution(percepts, actions)[self.percept_index(x)]

    def joint(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol]) -> Probability:
        """
        mu(x_{1:n} | y_{1:n}) as the chain product of conditionals.

        Raises:
            ShapeError: If the sequences differ in length
        """
        percepts, actions = tuple(percepts), tuple(actions)
        if len(percepts) != len(actions):
            raise ShapeError(f"joint needs equal lengths, got {len(percepts)} percepts and {len(actions)} actions")
        factors = []
        for s, x in enumerate(percepts):
            p = self.step_distribution(percepts[:s], actions[:s + 1])[self.percept_index(x)]
            factors.append(p)
            if p == 0:
                break
        return product(factors)

    def sample_next(self, percepts: Percepts, actions: Actions, rng: np.random.Generator) -> PerceptSymbol:
        """
        Draw x_t for views (x_{<t}, y_{1:t}) with one uniform variate.

        Raises:
            ModelInvalidError: If the conditional row does not normalise
        """
        probs = self.step_distribution(percepts, actions)
        if not is_normalized(probs, SAMPLING_TOLERANCE):
            raise ModelInvalidError(f"Conditional row of {self.name} sums to {float(accumulate(probs))}")
        u = rng.random()
        cumulative = 0.0
        last_positive = None
        for x, p in zip(self._percept_space, probs):
            if p == 0:
                continue
            cumulative += float(p)
            last_positive = x
            if u < cumulative:
                return x
        return last_positive

    def sample_percept(self, history: HistoryTape, rng: np.random.Generator) -> PerceptSymbol:
        """
        Sample the percept of the cycle in progress.

        Args:
            history: Tape whose current action is already recorded
            rng: Seeded generator; the draw is deterministic given its state

        Returns:
            Sampled percept
        """
        if history.pending_action is None:
            raise HistoryIndexError("sample_percept needs a tape ending in an action")
        percepts, actions = history.history_views(history.length + 1)
        return self.sample_next(percepts, actions, rng)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.canonical_serialization()})"


class FunctionEnvironment(EnvironmentModel):
    """Environment defined by an arbitrary law callable."""

    kind = "function"

    def __init__(
        self,
        law: Callable[[Percepts, Actions], Sequence[Probability]],
        action_alphabet: Alphabet,
        observation_alphabet: Alphabet,
        loss_alphabet: Optional[LossAlphabet] = None,
        name: str = "function",
        context_length: Optional[int] = None,
        action_independent: bool = False
    ):
        super().__init__(action_alphabet, observation_alphabet, loss_alphabet, name)
        self.law = law
        self.context_length = context_length
        self.action_independent = action_independent

    def step_distribution(self, percepts, actions):
        row = tuple(self.law(tuple(percepts), tuple(actions)))
        if len(row) != len(self.percept_space):
            raise ShapeError(f"Law of {self.name} returned {len(row)} entries for {len(self.percept_space)} percepts")
        return row

    def canonical_serialization(self) -> str:
        return f"function:{self.name}"


class LossAbsorbedEnvironment(EnvironmentModel):
    """
    Environment over x_t = x'_t l_t where l_t is the loss of the cycle.

    The law is the base law on x'_t when l_t equals the discretised loss and
    zero otherwise.
    """

    kind = "loss-absorbed"

    def __init__(self, base: EnvironmentModel, loss: LossSpec, loss_alphabet: LossAlphabet):
        if base.embeds_loss:
            raise ModelInvalidError(f"{base.name} already carries a loss component")
        super().__init__(base.action_alphabet, base.observation_alphabet, loss_alphabet, name=f"absorbed({base.name})")
        self.base = base
        self.loss = loss
        if base.context_length is not None and loss.context_length is not None:
            self.context_length = max(base.context_length, loss.context_length)
        self._levels = loss_alphabet.size

    def step_distribution(self, percepts, actions):
        plain = tuple(x.plain() for x in percepts)
        base_row = self.base.step_distribution(plain, actions)
        row: List[Probability] = []
        for o, p in zip(self.base.percept_space, base_row):
            level = self.loss_alphabet.index_of(self.loss(plain + (o,), actions))
            for l in range(self._levels):
                row.append(p if l == level else 0 * p)
        return tuple(row)

    def canonical_serialization(self) -> str:
        return f"absorbed[{self.base.canonical_serialization()};levels={self._levels}]"


def absorb_loss(env: EnvironmentModel, loss: LossSpec, loss_alphabet: LossAlphabet) -> EnvironmentModel:
    """
    Absorb a loss function into the percept distribution.

    Args:
        env: Environment without loss component
        loss: Loss to embed
        loss_alphabet: Discrete loss grid the loss values must lie on

    Returns:
        Environment over the extended percept space
    """
    return LossAbsorbedEnvironment(env, loss, loss_alphabet)


def enumerate_histories(model: EnvironmentModel, length: int) -> Iterator[Tuple[Percepts, Actions]]:
    """All (x_{1:s}, y_{1:s}) pairs with s = length over the model's alphabets."""
    for percepts in cartesian(model.percept_space, repeat=length):
        for actions in cartesian(model.action_space, repeat=length):
            yield percepts, actions


def _row_or_none(model: EnvironmentModel, percepts: Percepts, actions: Actions) -> Optional[Tuple[Probability, ...]]:
    try:
        return tuple(model.step_distribution(percepts, actions))
    except UnreachableHistoryError:
        return None


def laws_agree(first: EnvironmentModel, second: EnvironmentModel, depth: int, tolerance: float = 0.0) -> bool:
    """
    Compare the conditional rows of two environments on every history up to ``depth`` cycles.

    Args:
        first: Reference environment
        second: Environment over the same percept and action spaces
        depth: Longest conditioning history compared
        tolerance: Entrywise slack; 0 demands exact equality

    Returns:
        True if every row matches (a history one model rejects as
        unreachable must be rejected by the other)
    """
    if first.percept_space != second.percept_space or first.action_space != second.action_space:
        return False
    for length in range(depth + 1):
        for percepts, actions in enumerate_histories(first, length):
            for y in first.action_space:
                a = _row_or_none(first, percepts, actions + (y,))
                b = _row_or_none(second, percepts, actions + (y,))
                if a is None or b is None:
                    if (a is None) != (b is None):
                        return False
                    continue
                if tolerance == 0:
                    if a != b:
                        return False
                elif any(abs(float(p) - float(q)) > tolerance for p, q in zip(a, b)):
                    return False
    return True


def check_action_independence(model: EnvironmentModel, depth: int = 2, max_histories: int = 4096) -> bool:
    """
    Check empirically that the law ignores every action.

    The current action and the past actions are both varied on every history
    up to ``depth`` cycles (capped at ``max_histories`` histories per depth).

    Args:
        model: Environment to check
        depth: Longest history length checked

    Returns:
        True if no action changed any conditional row
    """
    for length in range(depth + 1):
        for count, (percepts, actions) in enumerate(enumerate_histories(model, length)):
            if count >= max_histories:
                break
            reference = None
            for y in model.action_space:
                try:
                    row = model.step_distribution(percepts, actions + (y,))
                except UnreachableHistoryError:
                    break
                if reference is None:
                    reference = row
                elif tuple(row) != tuple(reference):
                    return False
    return True


def validate_environment(model: EnvironmentModel, depth: int = 3, max_histories: int = 4096) -> int:
    """
    Validation suite run on every constructed environment.

    Checks that each conditional row on histories up to ``depth`` lies in
    [0, 1] and sums to one, and that a declared action independence holds.

    Args:
        model: Environment to validate
        depth: Longest history length checked
        max_histories: Cap on histories checked per length

    Returns:
        Number of conditional rows checked

    Raises:
        RangeError, NormalizationError, ModelInvalidError
    """
    checked = 0
    for length in range(depth + 1):
        for count, (percepts, actions) in enumerate(enumerate_histories(model, length)):
            if count >= max_histories:
                break
            for y in model.action_space:
                try:
                    row = model.step_distribution(percepts, actions + (y,))
                except UnreachableHistoryError:
                    continue
                for p in row:
                    if not in_unit_interval(p):
                        raise RangeError(f"{model.name} has probability {p} outside [0, 1]")
                if not is_normalized(row, NORMALIZATION_TOLERANCE):
                    raise NormalizationError(f"{model.name} row sums to {float(accumulate(row))}")
                checked += 1
    if model.action_independent and not check_action_independence(model, depth=min(depth, 2)):
        raise ModelInvalidError(f"{model.name} declares action independence but its law depends on actions")
    logger.debug(f"Validated {checked} conditional rows of {model.name}")
    return checked


def log_probability(p: Probability) -> float:
    """Natural log with log(0) = -inf."""
    return math.log(p) if p > 0 else -math.inf
