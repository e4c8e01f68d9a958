from typing import Any, Dict, Sequence
import logging

from core.environment import EnvironmentModel
from core.errors import ShapeError
from core.history import Alphabet, loss_grid
from core.numeric import Probability, format_number
from plugins.base_plugin import EnvironmentPlugin, complement, probability_vector
from plugins.bernoulli_plugin import BINARY

logger = logging.getLogger(__name__)


class BernoulliBandit(EnvironmentModel):
    """
    Multi-armed Bernoulli bandit with per-arm loss probabilities.

    Pulling arm y yields loss 1 with probability ``loss_probs[y]``. With
    ``embed_loss`` the percept carries the loss bit both as observation and
    as loss level; otherwise the percept is the bare outcome bit and losses
    come from an explicit loss function.
    """

    kind = "bandit"
    context_length = 0

    def __init__(self, loss_probs: Sequence[Probability], embed_loss: bool = True, name: str = ""):
        if len(loss_probs) == 0:
            raise ShapeError("A bandit needs at least one arm")
        self.loss_probs = tuple(loss_probs)
        label = ",".join(format_number(p) for p in self.loss_probs)
        super().__init__(
            Alphabet(len(self.loss_probs), name="arms"),
            BINARY,
            loss_grid(2) if embed_loss else None,
            name=name or f"bandit({label})"
        )
        if embed_loss:
            # percept space order: (0,0), (0,1), (1,0), (1,1)
            self._rows = tuple((complement(p), 0 * p, 0 * p, p) for p in self.loss_probs)
        else:
            self._rows = tuple((complement(p), p) for p in self.loss_probs)

    @property
    def n_arms(self) -> int:
        return len(self.loss_probs)

    @property
    def best_arm(self) -> int:
        """Arm with the smallest loss probability (smallest index on ties)."""
        return min(range(self.n_arms), key=lambda a: (self.loss_probs[a], a))

    def step_distribution(self, percepts, actions):
        return self._rows[actions[-1].index]

    def canonical_serialization(self) -> str:
        return "A" + ",".join(format_number(p) for p in self.loss_probs) + ("" if self.embeds_loss else "/o")


def make_bandit(loss_probs: Sequence[Any], embed_loss: bool = True, name: str = "") -> BernoulliBandit:
    """
    Bernoulli bandit emitting the loss bit of the pulled arm.

    Args:
        loss_probs: Loss-1 probability per arm
        embed_loss: Whether percepts carry the loss level

    Raises:
        ShapeError: If no arm is given
        RangeError: If a probability is outside [0, 1]
    """
    return BernoulliBandit(probability_vector(loss_probs), embed_loss, name)


class BanditPlugin(EnvironmentPlugin):
    """Plugin for Bernoulli bandits."""

    @property
    def name(self) -> str:
        return "bandit"

    @property
    def description(self) -> str:
        return "Bernoulli bandit whose percept is the loss bit of the pulled arm"

    @property
    def required_fields(self):
        return ["loss_probs"]

    def build(self, entry: Dict[str, Any]) -> EnvironmentModel:
        self.check_entry(entry)
        return make_bandit(entry["loss_probs"], bool(entry.get("embed_loss", True)), entry.get("name", ""))

    def build_grid_member(self, point: Any, entry: Dict[str, Any]) -> EnvironmentModel:
        return make_bandit(point, bool(entry.get("embed_loss", True)))
