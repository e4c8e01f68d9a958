from typing import Any, Dict, Sequence
import logging

from core.environment import EnvironmentModel
from core.errors import NormalizationError, ShapeError
from core.history import Alphabet
from core.numeric import NORMALIZATION_TOLERANCE, Probability, format_number, is_normalized
from plugins.base_plugin import EnvironmentPlugin, action_alphabet, probability_vector

logger = logging.getLogger(__name__)


class TableEnvironment(EnvironmentModel):
    """
    Order-k context table.

    The row used at cycle t is selected by the last ``order`` observations
    (missing ones replaced by a start marker equal to |X|) and the current
    action. Contexts are read as base-(|X|+1) numbers, oldest digit first;
    rows are laid out row-major as ``rows[context * |Y| + action]``.
    """

    kind = "custom-table"

    def __init__(
        self,
        order: int,
        rows: Sequence[Sequence[Probability]],
        n_observations: int,
        n_actions: int,
        name: str = "",
        action_independent: bool = False
    ):
        if order < 0:
            raise ShapeError(f"Table order must be non-negative, got {order}")
        expected = (n_observations + 1) ** order * n_actions
        if len(rows) != expected:
            raise ShapeError(f"Order-{order} table over |X|={n_observations}, |Y|={n_actions} needs {expected} rows, got {len(rows)}")
        for i, row in enumerate(rows):
            if len(row) != n_observations:
                raise ShapeError(f"Row {i} has {len(row)} entries, expected {n_observations}")
            if not is_normalized(row, NORMALIZATION_TOLERANCE):
                raise NormalizationError(f"Row {i} sums to {float(sum(row))}")
        super().__init__(Alphabet(n_actions, name="actions"), Alphabet(n_observations, name="observations"), name=name or f"table{order}")
        self.order = order
        self.context_length = order
        self.rows = tuple(tuple(r) for r in rows)
        self.action_independent = action_independent

    def context_index(self, percepts) -> int:
        start = self.observation_alphabet.size
        base = start + 1
        window = [x.observation for x in percepts[-self.order:]] if self.order else []
        digits = [start] * (self.order - len(window)) + window
        index = 0
        for d in digits:
            index = index * base + d
        return index

    def step_distribution(self, percepts, actions):
        return self.rows[self.context_index(percepts) * self.action_alphabet.size + actions[-1].index]

    def canonical_serialization(self) -> str:
        return f"T{self.order}:" + ";".join(",".join(format_number(p) for p in row) for row in self.rows)


def make_table(
    order: int,
    rows: Sequence[Sequence[Any]],
    n_actions: int = 2,
    name: str = "",
    action_independent: bool = False
) -> TableEnvironment:
    """Order-k table environment; the observation alphabet size is the row width."""
    parsed = [probability_vector(row) for row in rows]
    if not parsed:
        raise ShapeError("Table needs at least one row")
    return TableEnvironment(order, parsed, len(parsed[0]), n_actions, name, action_independent)


class TablePlugin(EnvironmentPlugin):
    """Plugin for custom order-k context tables."""

    @property
    def name(self) -> str:
        return "custom-table"

    @property
    def description(self) -> str:
        return "Order-k context table over the last k observations and the current action"

    @property
    def required_fields(self):
        return ["order", "rows"]

    def build(self, entry: Dict[str, Any]) -> EnvironmentModel:
        self.check_entry(entry)
        return make_table(
            int(entry["order"]),
            entry["rows"],
            action_alphabet(entry).size,
            entry.get("name", ""),
            bool(entry.get("action_independent", False)),
        )

    def build_grid_member(self, point: Any, entry: Dict[str, Any]) -> EnvironmentModel:
        return make_table(
            int(entry.get("order", 0)),
            point,
            action_alphabet(entry).size,
            action_independent=bool(entry.get("action_independent", False)),
        )
