from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import copy
import logging
import os

import jsonschema
import yaml

import config
from core.environment import EnvironmentModel
from core.errors import ConfigError, LaboratoryError
from core.loss import LossSpec, MatrixLoss
from core.mixture import ModelClass
from core.planner import PlannerConfig
from core.plugin_manager import PluginManager
from utils.json_utils import canonical_hash

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = [
    "convergence",
    "regret",
    "planner-oracle",
    "mdp-crosscheck",
    "greedy-check",
    "bandit-aixi",
    "loss-absorption",
    "planner-suites",
]

# Kinds that need a truth environment and a model class
NEEDS_ENVIRONMENT = {"convergence", "regret", "bandit-aixi"}

_NUMBER = {"type": ["number", "string"]}

_ENTRY = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "file": {"type": "string"},
        "name": {"type": "string"},
        "n_actions": {"type": "integer", "minimum": 1},
        "p": _NUMBER,
        "loss_probs": {"type": "array", "items": _NUMBER, "minItems": 1},
        "embed_loss": {"type": "boolean"},
        "transitions": {"type": "array"},
        "initial": {"type": "array", "items": _NUMBER},
        "order": {"type": "integer", "minimum": 0},
        "rows": {"type": "array", "items": {"type": "array", "items": _NUMBER}},
        "action_independent": {"type": "boolean"},
        "loss_matrix": {"type": "array", "items": {"type": "array", "items": _NUMBER}},
    },
    "anyOf": [{"required": ["kind"]}, {"required": ["file"]}],
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["version", "experiment"],
    "properties": {
        "version": {"type": "string"},
        "environment": _ENTRY,
        "model_class": {
            "type": "object",
            "properties": {
                "kind": {"type": "string"},
                "grid": {"type": "array"},
                "members": {"type": "array", "items": _ENTRY},
                "scheme": {"enum": ["uniform", "prefix-code"]},
                "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "n_actions": {"type": "integer", "minimum": 1},
                "embed_loss": {"type": "boolean"},
                "order": {"type": "integer", "minimum": 0},
            },
        },
        "mixture": {
            "type": "object",
            "properties": {
                "scheme": {"enum": ["uniform", "prefix-code"]},
                "weight_tolerance": {"type": "number", "minimum": 0},
            },
        },
        "loss": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["zero-one", "bandit", "matrix"]},
                "matrix": {"type": "array", "items": {"type": "array", "items": _NUMBER}},
                "levels": {"type": "integer", "minimum": 1},
                "exact": {"type": "boolean"},
            },
        },
        "planner": {
            "type": "object",
            "properties": {
                "horizon_mode": {"enum": ["fixed", "receding"]},
                "window": {"type": ["integer", "null"], "minimum": 1},
                "loss_source": {"enum": ["explicit", "embedded"]},
                "memoize": {"type": "boolean"},
                "root_workers": {"type": "integer", "minimum": 1},
                "tie_tolerance": {"type": "number", "minimum": 0},
            },
        },
        "experiment": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": EXPERIMENT_KINDS},
                "cycles": {"type": "integer", "minimum": 1},
                "seeds": {
                    "oneOf": [
                        {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                        {
                            "type": "object",
                            "required": ["count"],
                            "properties": {
                                "start": {"type": "integer"},
                                "count": {"type": "integer", "minimum": 1},
                            },
                        },
                    ]
                },
                "checkpoints": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "output_dir": {"type": "string"},
                "suites": {"type": "array", "items": {"type": "string"}},
                "plan_with": {"enum": ["truth", "mixture"]},
            },
        },
    },
}


@dataclass
class ExperimentConfig:
    """Validated experiment configuration with defaults merged in."""

    kind: str
    cycles: int
    seeds: List[int]
    checkpoints: List[int]
    output_dir: str
    environment: Optional[Dict[str, Any]]
    model_class: Optional[Dict[str, Any]]
    loss: Dict[str, Any]
    mixture: Dict[str, Any]
    planner: Dict[str, Any]
    experiment: Dict[str, Any]
    version: str
    config_hash: str
    source: str = ""
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def window(self) -> Optional[int]:
        return self.planner.get("window")

    def build_truth(self, manager: PluginManager) -> EnvironmentModel:
        if self.environment is None:
            raise ConfigError(f"Experiment '{self.kind}' needs an environment section")
        return manager.build_environment(self.environment)

    def build_class(self, manager: PluginManager) -> ModelClass:
        if self.model_class is None:
            raise ConfigError(f"Experiment '{self.kind}' needs a model_class section")
        return manager.build_class(self.model_class, self.mixture)

    def build_loss(self, n_observations: int, n_actions: Optional[int] = None) -> MatrixLoss:
        """
        Loss matrix from the loss section.

        A ``loss_matrix`` on the environment entry is used unless the loss
        section names a kind. When ``n_actions`` is None (passive prediction)
        the number of predictions is whatever the matrix has.
        """
        section = self.raw.get("loss", {})
        kind = self.loss.get("kind", "zero-one")
        exact = bool(self.loss.get("exact", False))
        if self.environment and "loss_matrix" in self.environment and "kind" not in section:
            loss = MatrixLoss(self.environment["loss_matrix"], name="environment")
        elif kind == "zero-one":
            loss = MatrixLoss.zero_one(n_observations, exact)
        elif kind == "bandit":
            loss = MatrixLoss.bandit(n_actions or 2, exact)
        else:
            if "matrix" not in self.loss:
                raise ConfigError("Matrix loss needs a 'matrix' field")
            loss = MatrixLoss(self.loss["matrix"], name="configured")
        loss.check_alphabets(n_observations, n_actions if n_actions is not None else loss.shape[1])
        return loss

    def planner_config(self, loss: Optional[LossSpec], total_cycles: Optional[int] = None) -> PlannerConfig:
        return PlannerConfig(
            total_cycles=total_cycles or self.cycles,
            horizon_mode=self.planner.get("horizon_mode", "fixed"),
            window=self.planner.get("window"),
            loss_source=self.planner.get("loss_source", "explicit"),
            loss=loss,
            memoize=bool(self.planner.get("memoize", False)),
            root_workers=int(self.planner.get("root_workers", 1)),
            tie_tolerance=float(self.planner.get("tie_tolerance", 1e-12)),
        )

    def loss_levels(self) -> int:
        return int(self.loss.get("levels", 2))

    def summary(self) -> Dict[str, Any]:
        return {"kind": self.kind, "source": self.source, "config_hash": self.config_hash, "version": self.version}


class ExperimentConfigLoader:
    """Class for loading and resolving experiment configuration files."""

    def __init__(self, manager: Optional[PluginManager] = None, results_dir: Optional[str] = None):
        """
        Initialize a config loader.

        Args:
            manager: Plugin manager used to resolve environment entries
            results_dir: Default parent directory of experiment outputs
        """
        self.manager = manager or PluginManager(validation_depth=config.EXPERIMENT_CONFIG["validation_depth"])
        self.results_dir = results_dir or config.SIMULATION_CONFIG["results_dir"]

    def read(self, file_path: str) -> Dict[str, Any]:
        """Read and schema-validate a YAML config file."""
        try:
            with open(file_path, "r") as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f"Cannot read config {file_path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Malformed YAML in {file_path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config {file_path} must be a mapping")
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            location = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ConfigError(f"{file_path}: {location}: {e.message}") from e
        base = os.path.dirname(os.path.abspath(file_path))
        for section in ("environment",):
            if section in data:
                data[section] = self.inline_entry(data[section], base)
        if "model_class" in data and "members" in data["model_class"]:
            data["model_class"]["members"] = [self.inline_entry(m, base) for m in data["model_class"]["members"]]
        return data

    def inline_entry(self, entry: Dict[str, Any], base: str) -> Dict[str, Any]:
        """Replace a ``file`` reference by the entry it points to (local keys win)."""
        if "file" not in entry:
            return entry
        path = entry["file"]
        candidates = [path, os.path.join(base, path)]
        for candidate in candidates:
            if os.path.exists(candidate):
                with open(candidate, "r") as f:
                    loaded = yaml.safe_load(f) or {}
                try:
                    jsonschema.validate(loaded, _ENTRY)
                except jsonschema.ValidationError as e:
                    raise ConfigError(f"{candidate}: {e.message}") from e
                merged = dict(loaded)
                merged.update({k: v for k, v in entry.items() if k != "file"})
                return merged
        raise ConfigError(f"Environment file not found: {path}")

    def load(self, file_path: str, seeds: Optional[List[int]] = None, output_dir: Optional[str] = None, resolve: bool = True) -> ExperimentConfig:
        """
        Load, validate and resolve an experiment config.

        Args:
            file_path: YAML config path
            seeds: Seeds overriding the file
            output_dir: Output directory overriding the file
            resolve: Whether to build every referenced environment once

        Returns:
            Resolved experiment config

        Raises:
            ConfigError: On schema violations or unresolved references
        """
        data = self.read(file_path)
        if data["version"] != config.ARTIFACT_VERSION:
            logger.warning(f"{file_path} declares version {data['version']}, running {config.ARTIFACT_VERSION}")
        defaults = config.section_defaults()
        sections = {name: {**defaults.get(name, {}), **data.get(name, {})} for name in ("planner", "mixture", "loss", "experiment")}
        experiment = sections["experiment"]
        kind = experiment["kind"]
        cfg = ExperimentConfig(
            kind=kind,
            cycles=int(experiment.get("cycles", max(experiment["checkpoints"]))),
            seeds=seeds if seeds else self._seeds(experiment.get("seeds")),
            checkpoints=sorted(int(c) for c in experiment["checkpoints"]),
            output_dir=output_dir or experiment.get("output_dir") or os.path.join(self.results_dir, kind),
            environment=data.get("environment"),
            model_class=data.get("model_class"),
            loss=sections["loss"],
            mixture=sections["mixture"],
            planner=sections["planner"],
            experiment=experiment,
            version=data["version"],
            config_hash=canonical_hash(data),
            source=file_path,
            raw=copy.deepcopy(data),
        )
        if not cfg.seeds:
            raise ConfigError("Seed list is empty")
        if resolve:
            self.resolve(cfg)
        logger.info(f"Loaded {kind} config from {file_path} (hash {cfg.config_hash[:12]})")
        return cfg

    def resolve(self, cfg: ExperimentConfig) -> None:
        """Build every referenced environment once so that errors surface before running."""
        if cfg.kind not in NEEDS_ENVIRONMENT:
            return
        try:
            truth = cfg.build_truth(self.manager)
            model_class = cfg.build_class(self.manager)
        except ConfigError:
            raise
        except LaboratoryError as e:
            raise ConfigError(f"Unresolvable config {cfg.source}: {e}") from e
        member = model_class[0]
        if (member.action_alphabet.size, member.observation_alphabet.size) != (
            truth.action_alphabet.size, truth.observation_alphabet.size
        ):
            raise ConfigError("Truth and model class use different alphabets")

    @staticmethod
    def _seeds(seeds: Any) -> List[int]:
        if seeds is None:
            return list(config.EXPERIMENT_CONFIG["seeds"])
        if isinstance(seeds, dict):
            start = int(seeds.get("start", 0))
            return list(range(start, start + int(seeds["count"])))
        return [int(s) for s in seeds]


def parse_seed_list(text: Optional[str]) -> Optional[List[int]]:
    """Parse a CLI seed list such as "1,2,3" or a range "0-99"."""
    if not text:
        return None
    seeds: List[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "-" in token:
            low, high = token.split("-", 1)
            seeds.extend(range(int(low), int(high) + 1))
        else:
            seeds.append(int(token))
    if not seeds:
        raise ConfigError(f"Empty seed list: {text!r}")
    return seeds
