import os
import importlib
import yaml
import logging
from typing import Any, Dict, List, Optional, Sequence

from core.environment import EnvironmentModel, validate_environment
from core.errors import ConfigError, EmptyClassError
from core.mixture import WEIGHT_TOLERANCE, ModelClass
from plugins.base_plugin import EnvironmentPlugin

logger = logging.getLogger(__name__)

DEFAULT_PLUGIN_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config", "plugins")


class PluginManager:
    """Manager for environment plugins.

    Plugins are registered through YAML files in the plugin config directory
    (one file per environment kind) and resolved lazily by kind.
    """

    def __init__(self, plugin_config_dir: str = DEFAULT_PLUGIN_DIR, validation_depth: int = 3):
        """
        Initialize the plugin manager.

        Args:
            plugin_config_dir: Directory containing plugin configurations
            validation_depth: History depth of the validation run on every built environment
        """
        self.plugin_config_dir = plugin_config_dir
        self.validation_depth = validation_depth
        self.plugins: Dict[str, EnvironmentPlugin] = {}

    def register_plugin(self, plugin: EnvironmentPlugin) -> None:
        """Register a plugin instance under its kind."""
        self.plugins[plugin.name] = plugin
        logger.debug(f"Registered environment plugin: {plugin.name}")

    def load_plugin(self, kind: str) -> EnvironmentPlugin:
        """
        Load a plugin by kind from configuration.

        Args:
            kind: Environment kind, also the YAML file stem

        Returns:
            Plugin instance

        Raises:
            ConfigError: If the registration is missing or broken
        """
        if kind in self.plugins:
            return self.plugins[kind]
        config_path = os.path.join(self.plugin_config_dir, f"{kind}.yaml")
        if not os.path.exists(config_path):
            raise ConfigError(f"Unknown environment kind '{kind}' (no {config_path})")
        with open(config_path, "r") as f:
            config = yaml.safe_load(f) or {}
        module_path = config.get("module_path")
        class_name = config.get("class_name")
        if not module_path or not class_name:
            raise ConfigError(f"Invalid plugin configuration: {config_path}")
        try:
            module = importlib.import_module(module_path)
            plugin = getattr(module, class_name)()
        except (ImportError, AttributeError) as e:
            raise ConfigError(f"Cannot load plugin {module_path}.{class_name}: {e}") from e
        self.register_plugin(plugin)
        return plugin

    def load_all_plugins(self) -> List[str]:
        """Load every plugin registered in the configuration directory."""
        if not os.path.isdir(self.plugin_config_dir):
            logger.warning(f"Plugin configuration directory not found: {self.plugin_config_dir}")
            return []
        for filename in sorted(os.listdir(self.plugin_config_dir)):
            if filename.endswith(".yaml"):
                self.load_plugin(os.path.splitext(filename)[0])
        return sorted(self.plugins)

    def build_environment(self, entry: Dict[str, Any], validate: bool = True) -> EnvironmentModel:
        """
        Build and validate an environment from a definition entry.

        Args:
            entry: Definition entry with at least a ``kind`` field
            validate: Whether to run the environment validation suite

        Returns:
            Constructed environment
        """
        if "kind" not in entry:
            raise ConfigError("Environment entry has no 'kind'")
        env = self.load_plugin(entry["kind"]).build(entry)
        if validate:
            validate_environment(env, depth=self.validation_depth)
        logger.debug(f"Built environment {env.name}")
        return env

    def make_grid_class(
        self,
        kind: str,
        grid: Sequence[Any],
        scheme: str = "uniform",
        entry: Optional[Dict[str, Any]] = None,
        explicit_weights: Optional[Sequence[float]] = None,
        weight_tolerance: float = WEIGHT_TOLERANCE
    ) -> ModelClass:
        """
        Model class with one member per grid point.

        Args:
            kind: Environment kind of every member
            grid: Parameter values, one per member
            scheme: Prior weight scheme ("uniform" or "prefix-code")
            entry: Shared fields passed to every member
            explicit_weights: Optional weights overriding the scheme
            weight_tolerance: Slack accepted on sum(w) = 1

        Returns:
            Model class with weights per ``prior_weights``

        Raises:
            EmptyClassError: If the grid is empty
            ConfigError: If grid values repeat
        """
        if len(grid) == 0:
            raise EmptyClassError(f"Empty parameter grid for kind '{kind}'")
        plugin = self.load_plugin(kind)
        members = [plugin.build_grid_member(point, entry or {}) for point in grid]
        serials = [m.canonical_serialization() for m in members]
        if len(set(serials)) != len(serials):
            raise ConfigError(f"Grid for kind '{kind}' contains duplicate members")
        for member in members:
            validate_environment(member, depth=min(self.validation_depth, 2))
        model_class = ModelClass.from_members(members, scheme, explicit_weights, weight_tolerance=weight_tolerance)
        logger.info(f"Built {kind} model class with {len(model_class)} members ({scheme} prior)")
        return model_class

    def build_class(self, section: Dict[str, Any], mixture: Optional[Dict[str, Any]] = None) -> ModelClass:
        """
        Model class from a ``model_class`` config section.

        The section either gives ``kind`` + ``grid`` or an explicit ``members``
        list of environment entries.

        Args:
            section: The ``model_class`` section
            mixture: The ``mixture`` section (default scheme and weight tolerance)
        """
        mixture = mixture or {}
        scheme = section.get("scheme", mixture.get("scheme", "uniform"))
        tolerance = float(mixture.get("weight_tolerance", WEIGHT_TOLERANCE))
        weights = section.get("weights")
        if "members" in section:
            members = [self.build_environment(m) for m in section["members"]]
            if not members:
                raise EmptyClassError("Model class lists no members")
            return ModelClass.from_members(members, scheme, weights, weight_tolerance=tolerance)
        if "grid" not in section or "kind" not in section:
            raise ConfigError("model_class needs either 'members' or 'kind' and 'grid'")
        return self.make_grid_class(section["kind"], section["grid"], scheme, section, weights, tolerance)

