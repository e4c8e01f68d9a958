from typing import Any, Dict, Optional
import logging

from core.environment import EnvironmentModel
from core.errors import RangeError
from core.history import Alphabet
from core.numeric import Probability, format_number, in_unit_interval, parse_probability
from plugins.base_plugin import EnvironmentPlugin, action_alphabet, complement

logger = logging.getLogger(__name__)

BINARY = Alphabet(2, labels=("0", "1"), name="bits")


class BernoulliSource(EnvironmentModel):
    """i.i.d. binary source emitting 1 with probability p, whatever the history or actions."""

    kind = "bernoulli"
    context_length = 0
    action_independent = True

    def __init__(self, p: Probability, actions: Optional[Alphabet] = None, name: str = ""):
        if not in_unit_interval(p):
            raise RangeError(f"Bernoulli parameter {p} outside [0, 1]")
        super().__init__(actions or Alphabet(2, name="actions"), BINARY, name=name or f"bern({format_number(p)})")
        self.p = p
        self._row = (complement(p), p)

    def step_distribution(self, percepts, actions):
        return self._row

    def canonical_serialization(self) -> str:
        return f"B{format_number(self.p)}"


def make_bernoulli(p, n_actions: int = 2, name: str = "") -> BernoulliSource:
    """
    Bernoulli source with conditional(1 | any history) = p.

    Args:
        p: Probability of percept 1 (float, Fraction or a string such as "3/4")
        n_actions: Size of the (ignored) action alphabet

    Raises:
        RangeError: If p is outside [0, 1]
    """
    return BernoulliSource(parse_probability(p), Alphabet(n_actions, name="actions"), name)


class BernoulliPlugin(EnvironmentPlugin):
    """Plugin for i.i.d. binary sources."""

    @property
    def name(self) -> str:
        return "bernoulli"

    @property
    def description(self) -> str:
        return "Action-independent Bernoulli(p) source over {0, 1}"

    @property
    def required_fields(self):
        return ["p"]

    def build(self, entry: Dict[str, Any]) -> EnvironmentModel:
        self.check_entry(entry)
        return BernoulliSource(parse_probability(entry["p"]), action_alphabet(entry), entry.get("name", ""))

    def build_grid_member(self, point: Any, entry: Dict[str, Any]) -> EnvironmentModel:
        return BernoulliSource(parse_probability(point), action_alphabet(entry))
