from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence
import glob
import logging
import os

import numpy as np
import pandas as pd

from utils.csv_utils import read_body
from utils.json_utils import load_json, save_json

logger = logging.getLogger(__name__)

OUT_OF_ASSUMPTION = "out-of-assumption"


@dataclass
class ExperimentReport:
    """Outcome of one experiment: output files, summary tables and verdicts."""

    kind: str
    config_hash: str
    version: str
    run_id: str = ""
    csv_paths: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    verdicts: Dict[str, Optional[bool]] = field(default_factory=dict)
    labels: List[str] = field(default_factory=list)
    cases: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True unless a configured verdict failed (None means no verdict)."""
        return all(v is not False for v in self.verdicts.values())

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["passed"] = self.passed
        return data

    def save(self, output_dir: str) -> str:
        path = os.path.join(output_dir, f"{self.kind}_report.json")
        save_json(self.to_dict(), path)
        return path

    @classmethod
    def load(cls, path: str) -> "ExperimentReport":
        data = load_json(path)
        data.pop("passed", None)
        return cls(**data)


class ReportEvaluator:
    """Class for summarising and comparing experiment reports."""

    def checkpoint_table(self, frames: Sequence[pd.DataFrame], column: str, checkpoints: Sequence[int]) -> pd.DataFrame:
        """
        Median and mean of a per-cycle column across seeds at each checkpoint.

        Args:
            frames: One per-cycle table per seed (column ``cycle`` 1-based)
            column: Column to aggregate
            checkpoints: Cycles at which to read the column

        Returns:
            Table with columns checkpoint, median, mean
        """
        rows = []
        for c in checkpoints:
            values = np.array([frame[column].iloc[c - 1] for frame in frames], dtype=float)
            rows.append({"checkpoint": c, "median": float(np.median(values)), "mean": float(np.mean(values))})
        return pd.DataFrame(rows, columns=["checkpoint", "median", "mean"])

    def render(self, report: ExperimentReport) -> str:
        """Human-readable summary of a report."""
        lines = [f"Experiment: {report.kind}  (config {report.config_hash[:12]}, version {report.version})"]
        if report.labels:
            lines.append(f"Labels: {', '.join(report.labels)}")
        for key, value in report.summary.items():
            if isinstance(value, dict) and value and all(isinstance(v, dict) for v in value.values()):
                lines.append(f"{key}:")
                for sub, row in value.items():
                    cells = ", ".join(f"{k}={_fmt(v)}" for k, v in row.items())
                    lines.append(f"  {sub}: {cells}")
            else:
                lines.append(f"{key}: {_fmt(value)}")
        if report.cases:
            failed = [c for c in report.cases if c.get("status") == "fail"]
            lines.append(f"Cases: {len(report.cases)} ({len(failed)} failed)")
            for case in failed[:20]:
                lines.append(f"  FAIL {case.get('suite')}: {case.get('case')} {case.get('detail', '')}")
        for name, verdict in report.verdicts.items():
            mark = "n/a" if verdict is None else ("PASS" if verdict else "FAIL")
            lines.append(f"[{mark}] {name}")
        lines.append("Overall: " + ("PASS" if report.passed else "FAIL"))
        return "\n".join(lines)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list) and value and isinstance(value[0], float):
        return "[" + ", ".join(f"{v:.6g}" for v in value) + "]"
    return str(value)


def compare_result_dirs(dir_a: str, dir_b: str, patterns: Sequence[str] = ("*.csv", "*.dat")) -> Dict[str, Any]:
    """
    Compare the bodies of every table present in two result directories.

    Metadata lines are ignored; everything else must match byte for byte.

    Returns:
        Dict with ``identical`` (bool), ``mismatched`` and ``missing`` file lists
    """
    def collect(root: str) -> Dict[str, str]:
        found = {}
        for pattern in patterns:
            for path in glob.glob(os.path.join(root, "**", pattern), recursive=True):
                found[os.path.relpath(path, root)] = path
        return found

    files_a, files_b = collect(dir_a), collect(dir_b)
    missing = sorted(set(files_a) ^ set(files_b))
    mismatched = sorted(
        name for name in set(files_a) & set(files_b)
        if read_body(files_a[name]) != read_body(files_b[name])
    )
    compared = len(set(files_a) & set(files_b))
    logger.info(f"Compared {compared} tables: {len(mismatched)} differ, {len(missing)} unmatched")
    return {
        "identical": not mismatched and not missing and compared > 0,
        "compared": compared,
        "mismatched": mismatched,
        "missing": missing,
    }
