import json
import hashlib
import logging
from fractions import Fraction
from typing import Dict, Any
import os

import numpy as np

logger = logging.getLogger(__name__)


def _default(value: Any) -> Any:
    """Encode values json does not know: Fractions as "p/q", numpy scalars and arrays as plain numbers."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}" if value.denominator != 1 else value.numerator
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def load_json(file_path: str) -> Dict[str, Any]:
    """
    Load JSON from a file.

    Args:
        file_path: Path to the JSON file

    Returns:
        Loaded JSON as a dictionary (empty on read errors)
    """
    try:
        with open(file_path, 'r') as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Error loading JSON from {file_path}: {e}")
        return {}


def save_json(data: Dict[str, Any], file_path: str, pretty: bool = True) -> bool:
    """
    Save data as JSON to a file.

    Args:
        data: Data to save
        file_path: Path to the output file
        pretty: Whether to format the JSON for readability

    Returns:
        True if successful, False otherwise
    """
    try:
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        with open(file_path, 'w') as f:
            json.dump(data, f, indent=2 if pretty else None, default=_default)
            f.write("\n")
        return True
    except (OSError, TypeError) as e:
        logger.error(f"Error saving JSON to {file_path}: {e}")
        return False


def canonical_hash(data: Dict[str, Any]) -> str:
    """sha256 of the canonical (sorted, compact) JSON encoding."""
    encoded = json.dumps(data, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()
