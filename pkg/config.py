"""
Configuration for the universal decision laboratory.

Values here are defaults; experiment YAML files override the planner,
mixture, loss and experiment sections, and UNIDEC_* environment variables
(optionally from a .env file) override the directories and worker count.
"""

import os
from typing import Dict, Any

from dotenv import load_dotenv

load_dotenv()

# Version of the config grammar and CSV layouts, recorded in every report
ARTIFACT_VERSION = "1.0"

# Logging Configuration
LOGGING_CONFIG = {
    "name": "",  # root logger, so every module's logger inherits the handlers
    "level": os.getenv("UNIDEC_LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "log_file": "unidec.log"
}

# Planner Configuration
PLANNER_CONFIG = {
    "horizon_mode": "fixed",  # Options: fixed, receding
    "window": None,  # Lookahead m for receding mode
    "loss_source": "explicit",  # Options: explicit, embedded
    "memoize": False,  # Cache subtree values for finite-context models
    "root_workers": 1,  # Threads across root actions
    "tie_tolerance": 1e-12  # Float values this close to the minimum are tied
}

# Mixture Configuration
MIXTURE_CONFIG = {
    "scheme": "uniform",  # Options: uniform, prefix-code
    "weight_tolerance": 1e-12  # Slack on sum(w) = 1
}

# Loss Configuration
LOSS_CONFIG = {
    "kind": "zero-one",  # Options: zero-one, bandit, matrix
    "levels": 2,  # Size G of the loss grid {0, 1/(G-1), ..., 1}
    "exact": False  # Use Fractions for built-in matrices
}

# Experiment Configuration
EXPERIMENT_CONFIG = {
    "checkpoints": [10, 100, 1000],
    "seeds": list(range(100)),
    "regret_ceiling": 1.1,  # Mean L_xi / L_mu at the last checkpoint
    "truth_weight_floor": 0.5,  # Median posterior weight of the truth at the last checkpoint
    "oracle_grid": ["0", "1/4", "1/2", "3/4", "1"],
    "oracle_horizons": [1, 2, 3],
    "policy_instances": 20,
    "mdp_instances": 100,
    "mdp_max_states": 3,
    "mdp_max_horizon": 5,
    "crosscheck_tolerance": 1e-9,
    "specialization_depth": 4,  # History length of the MDP-versus-table law comparison
    "greedy_cycles": 4,  # Lifetime of the greedy sweep; histories up to length 3
    "float_tolerance": 1e-12,
    "absorption_seeds": 100,
    "absorption_cycles": 6,
    "validation_depth": 3
}

# Simulation Configuration
SIMULATION_CONFIG = {
    "results_dir": os.getenv("UNIDEC_RESULTS_DIR", "results"),  # Directory for CSV and JSON reports
    "log_dir": os.getenv("UNIDEC_LOG_DIR", "logs"),  # Directory for logs
    "workers": int(os.getenv("UNIDEC_WORKERS", "1")),  # Processes across seeds
    "format": "csv"  # Options: csv, gnuplot
}


def section_defaults() -> Dict[str, Dict[str, Any]]:
    """Default sections merged under experiment YAML files."""
    return {
        "planner": dict(PLANNER_CONFIG),
        "mixture": dict(MIXTURE_CONFIG),
        "loss": dict(LOSS_CONFIG),
        "experiment": dict(EXPERIMENT_CONFIG),
    }
