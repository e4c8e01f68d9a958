from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence, Tuple
import logging

from core.errors import AlphabetMismatchError, DiscretizationError, HistoryIndexError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Alphabet:
    """Finite, index-based alphabet with optional human-readable labels."""

    size: int
    labels: Tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 1:
            raise ValueError(f"Alphabet size must be a positive integer, got {self.size}")
        if self.labels:
            if len(self.labels) != self.size:
                raise ValueError(f"Alphabet {self.name!r} has {len(self.labels)} labels for {self.size} symbols")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError(f"Alphabet {self.name!r} has duplicate labels")

    @property
    def symbols(self) -> Tuple[int, ...]:
        return tuple(range(self.size))

    def contains(self, index: int) -> bool:
        return isinstance(index, int) and 0 <= index < self.size

    def label(self, index: int) -> str:
        if self.labels:
            return self.labels[index]
        return str(index)


@dataclass(frozen=True)
class LossAlphabet(Alphabet):
    """
    Discrete loss grid {0, 1/(G-1), ..., 1}.

    A single-level grid only represents the loss 0.
    """

    def value(self, index: int) -> Fraction:
        """Loss value carried by a level index."""
        if not self.contains(index):
            raise AlphabetMismatchError(f"Loss level {index} outside grid of size {self.size}")
        if self.size == 1:
            return Fraction(0)
        return Fraction(index, self.size - 1)

    def index_of(self, loss_value, tolerance: float = 1e-12) -> int:
        """
        Level index representing a loss value.

        Args:
            loss_value: Loss in [0, 1]
            tolerance: Accepted float distance to a grid point

        Returns:
            Index of the matching level

        Raises:
            DiscretizationError: If the value is not on the grid
        """
        if self.size == 1:
            if loss_value == 0:
                return 0
            raise DiscretizationError(f"Loss {loss_value} not representable in a single-level grid")
        scaled = loss_value * (self.size - 1)
        index = int(round(scaled))
        if 0 <= index < self.size and abs(scaled - index) <= tolerance * (self.size - 1):
            return index
        raise DiscretizationError(f"Loss {loss_value} not representable on grid of size {self.size}")


def loss_grid(levels: int = 2) -> LossAlphabet:
    """Build the loss alphabet with ``levels`` equally spaced values."""
    labels = tuple(str(LossAlphabet(levels).value(i)) for i in range(levels))
    return LossAlphabet(size=levels, labels=labels, name="loss")


@dataclass(frozen=True, order=True)
class ActionSymbol:
    """One agent output y_t."""

    index: int

    def __str__(self) -> str:
        return str(self.index)


@dataclass(frozen=True, order=True)
class PerceptSymbol:
    """One environment output x_t, optionally carrying an embedded loss level."""

    observation: int
    loss_level: Optional[int] = None

    def plain(self) -> "PerceptSymbol":
        """The percept without its loss component."""
        if self.loss_level is None:
            return self
        return PerceptSymbol(self.observation)

    def __str__(self) -> str:
        if self.loss_level is None:
            return str(self.observation)
        return f"{self.observation}/{self.loss_level}"

    @classmethod
    def parse(cls, text: str) -> "PerceptSymbol":
        if "/" in text:
            observation, level = text.split("/", 1)
            return cls(int(observation), int(level))
        return cls(int(text))


Cycle = Tuple[ActionSymbol, PerceptSymbol]


@dataclass(frozen=True)
class HistoryTape:
    """
    Append-only record y_1 x_1 ... y_t x_t.

    A tape may additionally hold the action of the cycle in progress
    (``pending_action``), which is what conditionals and samplers need to form
    y_{1:t}. All mutators return new tapes.
    """

    action_alphabet: Alphabet
    observation_alphabet: Alphabet
    loss_alphabet: Optional[LossAlphabet] = None
    cycles: Tuple[Cycle, ...] = ()
    pending_action: Optional[ActionSymbol] = None

    @classmethod
    def empty(
        cls,
        action_alphabet: Alphabet,
        observation_alphabet: Alphabet,
        loss_alphabet: Optional[LossAlphabet] = None
    ) -> "HistoryTape":
        return cls(action_alphabet, observation_alphabet, loss_alphabet)

    @classmethod
    def for_model(cls, model) -> "HistoryTape":
        """Empty tape over the alphabets of an environment model."""
        return cls(model.action_alphabet, model.observation_alphabet, model.loss_alphabet)

    @property
    def length(self) -> int:
        return len(self.cycles)

    def __len__(self) -> int:
        return len(self.cycles)

    @property
    def percepts(self) -> Tuple[PerceptSymbol, ...]:
        return tuple(x for _, x in self.cycles)

    @property
    def actions(self) -> Tuple[ActionSymbol, ...]:
        """Actions of completed cycles (the pending action excluded)."""
        return tuple(y for y, _ in self.cycles)

    def _check_action(self, y: ActionSymbol) -> None:
        if not self.action_alphabet.contains(y.index):
            raise AlphabetMismatchError(f"Action {y.index} outside action alphabet of size {self.action_alphabet.size}")

    def _check_percept(self, x: PerceptSymbol) -> None:
        if not self.observation_alphabet.contains(x.observation):
            raise AlphabetMismatchError(
                f"Observation {x.observation} outside observation alphabet of size {self.observation_alphabet.size}"
            )
        if self.loss_alphabet is None:
            if x.loss_level is not None:
                raise AlphabetMismatchError("Percept carries a loss level but the tape has no loss alphabet")
        elif x.loss_level is None or not self.loss_alphabet.contains(x.loss_level):
            raise AlphabetMismatchError(f"Loss level {x.loss_level} outside loss alphabet of size {self.loss_alphabet.size}")

    def append_cycle(self, y: ActionSymbol, x: PerceptSymbol) -> "HistoryTape":
        """
        Append one complete cycle (y then x).

        Args:
            y: Action of the cycle
            x: Percept received after y

        Returns:
            New tape one cycle longer

        Raises:
            AlphabetMismatchError: If a symbol is outside its alphabet
        """
        if self.pending_action is not None:
            raise HistoryIndexError("Tape has a pending action; complete it with complete_cycle")
        self._check_action(y)
        self._check_percept(x)
        return replace(self, cycles=self.cycles + ((y, x),))

    def with_action(self, y: ActionSymbol) -> "HistoryTape":
        """Record the action of the cycle in progress."""
        if self.pending_action is not None:
            raise HistoryIndexError("Tape already has a pending action")
        self._check_action(y)
        return replace(self, pending_action=y)

    def complete_cycle(self, x: PerceptSymbol) -> "HistoryTape":
        """Close the cycle in progress with its percept."""
        if self.pending_action is None:
            raise HistoryIndexError("No pending action to complete")
        self._check_percept(x)
        return replace(self, cycles=self.cycles + ((self.pending_action, x),), pending_action=None)

    def history_views(self, t: int) -> Tuple[Tuple[PerceptSymbol, ...], Tuple[ActionSymbol, ...]]:
        """
        Views (x_{<t}, y_{1:t}) used to condition the percept of cycle t.

        Args:
            t: Cycle index, 1-based

        Returns:
            Tuple of (t-1 percepts, t actions)

        Raises:
            HistoryIndexError: If y_t is not on the tape
        """
        available = self.length + (1 if self.pending_action is not None else 0)
        if not isinstance(t, int) or t < 1 or t > available:
            raise HistoryIndexError(f"Cycle {t} outside 1..{available} for tape of length {self.length}")
        percepts = tuple(x for _, x in self.cycles[:t - 1])
        actions = tuple(y for y, _ in self.cycles[:t])
        if t > self.length:
            actions = actions + (self.pending_action,)
        return percepts, actions

    def serialize(self) -> str:
        """Space-separated ``y:x`` pairs, one per completed cycle."""
        return " ".join(f"{y}:{x}" for y, x in self.cycles)

    @classmethod
    def parse(
        cls,
        text: str,
        action_alphabet: Alphabet,
        observation_alphabet: Alphabet,
        loss_alphabet: Optional[LossAlphabet] = None
    ) -> "HistoryTape":
        tape = cls.empty(action_alphabet, observation_alphabet, loss_alphabet)
        for token in text.split():
            action_text, percept_text = token.split(":", 1)
            tape = tape.append_cycle(ActionSymbol(int(action_text)), PerceptSymbol.parse(percept_text))
        return tape


def build_tape(
    action_alphabet: Alphabet,
    observation_alphabet: Alphabet,
    actions: Sequence[ActionSymbol],
    percepts: Sequence[PerceptSymbol],
    loss_alphabet: Optional[LossAlphabet] = None
) -> HistoryTape:
    """
    Tape holding the given completed cycles.

    Raises:
        ShapeError: If the action and percept sequences differ in length
        AlphabetMismatchError: If a symbol is outside its alphabet
    """
    if len(actions) != len(percepts):
        raise ShapeError(f"Tape needs one percept per action, got {len(actions)} actions and {len(percepts)} percepts")
    tape = HistoryTape.empty(action_alphabet, observation_alphabet, loss_alphabet)
    for y, x in zip(actions, percepts):
        tape = tape.append_cycle(y, x)
    return tape
