from abc import ABC, abstractmethod
from typing import Any, Dict, List, Sequence
import logging

from core.environment import EnvironmentModel
from core.errors import ConfigError, RangeError
from core.history import Alphabet
from core.numeric import Probability, in_unit_interval, parse_probability

logger = logging.getLogger(__name__)


class EnvironmentPlugin(ABC):
    """Abstract base class for environment families.

    A plugin turns one environment definition entry (a dict read from a YAML
    config) into an EnvironmentModel, and builds grid members for
    model classes parameterised by a single value per member.
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """Get the kind handled by the plugin."""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        """Get the description of the plugin."""
        pass

    @property
    def required_fields(self) -> List[str]:
        """Entry fields that must be present besides ``kind``."""
        return []

    @abstractmethod
    def build(self, entry: Dict[str, Any]) -> EnvironmentModel:
        """
        Build an environment from a definition entry.

        Args:
            entry: Environment definition entry

        Returns:
            Constructed environment
        """
        pass

    def build_grid_member(self, point: Any, entry: Dict[str, Any]) -> EnvironmentModel:
        """
        Build the class member for one grid point.

        Args:
            point: Grid value (parameter of the family)
            entry: Shared fields (alphabet sizes, names)

        Returns:
            Constructed environment
        """
        raise ConfigError(f"Environment kind '{self.name}' does not support parameter grids")

    def check_entry(self, entry: Dict[str, Any]) -> None:
        missing = [f for f in self.required_fields if f not in entry]
        if missing:
            raise ConfigError(f"Environment entry of kind '{self.name}' misses fields: {', '.join(missing)}")


def action_alphabet(entry: Dict[str, Any], default: int = 2) -> Alphabet:
    """Action alphabet from the ``n_actions`` field of an entry."""
    n_actions = int(entry.get("n_actions", default))
    if n_actions < 1:
        raise ConfigError(f"n_actions must be positive, got {n_actions}")
    return Alphabet(n_actions, name="actions")


def probability_vector(values: Sequence[Any]) -> List[Probability]:
    """Parse a list of probabilities, raising RangeError outside [0, 1]."""
    parsed = [parse_probability(v) for v in values]
    for p in parsed:
        if not in_unit_interval(p):
            raise RangeError(f"Probability {p} outside [0, 1]")
    return parsed


def complement(p: Probability) -> Probability:
    return 1 - p
