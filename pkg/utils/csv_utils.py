"""
Deterministic CSV and gnuplot emission.

Every file starts with one metadata line (timestamp, run id, config hash,
artifact version); the body below it depends only on the data, so two runs
with the same config and seeds produce byte-identical bodies.
"""

from datetime import datetime, timezone
from typing import Any, Dict, Optional
import logging
import os
import uuid

import pandas as pd

logger = logging.getLogger(__name__)

METADATA_PREFIX = "# generated="
FLOAT_FORMAT = "%.17g"


def metadata_line(config_hash: str, version: str, run_id: Optional[str] = None) -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return f"{METADATA_PREFIX}{stamp} run={run_id or uuid.uuid4()} config={config_hash} version={version}\n"


def frame_body(frame: pd.DataFrame, fmt: str = "csv") -> str:
    """Render a table without the metadata line."""
    if fmt == "gnuplot":
        columns = "# " + " ".join(str(c) for c in frame.columns) + "\n"
        return columns + frame.to_csv(index=False, header=False, sep=" ", float_format=FLOAT_FORMAT, lineterminator="\n")
    if fmt != "csv":
        raise ValueError(f"Unknown output format: {fmt}")
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_table(
    frame: pd.DataFrame,
    path: str,
    meta: Dict[str, Any],
    fmt: str = "csv"
) -> str:
    """
    Write a table with its metadata line.

    Args:
        frame: Table to write
        path: Output path without extension
        meta: Needs ``config_hash`` and ``version``; ``run_id`` is optional
        fmt: "csv" or "gnuplot"

    Returns:
        Path of the written file
    """
    target = f"{path}.{'dat' if fmt == 'gnuplot' else 'csv'}"
    directory = os.path.dirname(target)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(target, "w", newline="") as f:
        f.write(metadata_line(meta["config_hash"], meta["version"], meta.get("run_id")))
        f.write(frame_body(frame, fmt))
    logger.debug(f"Wrote {len(frame)} rows to {target}")
    return target


def read_body(path: str) -> str:
    """File contents with the metadata line removed."""
    with open(path, "r", newline="") as f:
        lines = f.readlines()
    if lines and lines[0].startswith(METADATA_PREFIX):
        lines = lines[1:]
    return "".join(lines)


def read_table(path: str) -> pd.DataFrame:
    """Load a CSV written by ``write_table``."""
    return pd.read_csv(path, skiprows=1)
