from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Callable, List, Optional, Sequence
import logging

from core.errors import RangeError, ShapeError
from core.history import ActionSymbol, PerceptSymbol
from core.numeric import Probability, format_number, in_unit_interval, parse_probability

logger = logging.getLogger(__name__)


class LossSpec(ABC):
    """
    Per-cycle loss l^t(x_{1:t} y_{1:t}) with values in [0, 1].

    ``context_length`` is the number of trailing percepts the loss reads
    (None when it may read the whole history).
    """

    context_length: Optional[int] = None

    @abstractmethod
    def __call__(self, percepts: Sequence[PerceptSymbol], actions: Sequence[ActionSymbol]) -> Probability:
        """
        Loss of cycle t = len(percepts) = len(actions).

        Args:
            percepts: x_{1:t}
            actions: y_{1:t}

        Returns:
            Loss value in [0, 1]
        """

    @abstractmethod
    def describe(self) -> dict:
        """Serializable description for reports."""


class MatrixLoss(LossSpec):
    """Time-invariant loss matrix indexed [observation][action]."""

    context_length = 0

    def __init__(self, matrix: Sequence[Sequence], name: str = "matrix"):
        """
        Initialize a matrix loss.

        Args:
            matrix: Rows per observation, one column per action; entries may be
                floats, Fractions or strings like "1/4"
            name: Label used in reports
        """
        if not matrix or not matrix[0]:
            raise ShapeError("Loss matrix must be non-empty")
        width = len(matrix[0])
        rows: List[List[Probability]] = []
        for row in matrix:
            if len(row) != width:
                raise ShapeError("Loss matrix rows must have equal length")
            parsed = [parse_probability(v) for v in row]
            for value in parsed:
                if not in_unit_interval(value):
                    raise RangeError(f"Loss value {value} outside [0, 1]")
            rows.append(parsed)
        self.matrix = tuple(tuple(r) for r in rows)
        self.name = name

    @classmethod
    def zero_one(cls, size: int = 2, exact: bool = False) -> "MatrixLoss":
        """0-1 loss for predicting the next observation."""
        one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
        return cls([[zero if x == y else one for y in range(size)] for x in range(size)], name="zero-one")

    @classmethod
    def bandit(cls, n_arms: int, exact: bool = False) -> "MatrixLoss":
        """Loss equal to the observed outcome bit, whatever arm was pulled."""
        one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
        return cls([[zero] * n_arms, [one] * n_arms], name="bandit")

    @property
    def shape(self):
        return len(self.matrix), len(self.matrix[0])

    def value(self, observation: int, action: int) -> Probability:
        return self.matrix[observation][action]

    def __call__(self, percepts, actions):
        return self.matrix[percepts[-1].observation][actions[-1].index]

    def check_alphabets(self, n_observations: int, n_actions: int) -> None:
        """Raise ShapeError unless the matrix is |X| x |Y|."""
        if self.shape != (n_observations, n_actions):
            raise ShapeError(f"Loss matrix shape {self.shape} does not match alphabets ({n_observations}, {n_actions})")

    def describe(self) -> dict:
        return {"kind": "matrix", "name": self.name,
                "matrix": [[format_number(v) for v in row] for row in self.matrix]}


class CallableLoss(LossSpec):
    """
    Arbitrary history-dependent loss given as a callable.

    Every value is range-checked when evaluated.
    """

    def __init__(
        self,
        fn: Callable[[Sequence[PerceptSymbol], Sequence[ActionSymbol]], Probability],
        name: str = "callable",
        context_length: Optional[int] = None
    ):
        self.fn = fn
        self.name = name
        self.context_length = context_length

    def __call__(self, percepts, actions):
        if len(percepts) != len(actions) or not percepts:
            raise ShapeError("Loss needs equally long, non-empty percept and action sequences")
        value = self.fn(percepts, actions)
        if not in_unit_interval(value):
            raise RangeError(f"Loss {self.name} produced {value} outside [0, 1]")
        return value

    def describe(self) -> dict:
        return {"kind": "callable", "name": self.name}
