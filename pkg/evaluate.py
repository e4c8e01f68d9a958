#!/usr/bin/env python
"""
Script to compare experiment result directories and print their report summaries.

Two runs with the same config and seeds must produce byte-identical table
bodies (the metadata line is ignored).
"""

import argparse
import glob
import os
import sys

# Add the project root to the Python path to ensure imports work correctly
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from simulation.evaluation import ExperimentReport, ReportEvaluator, compare_result_dirs
from utils.json_utils import save_json
from utils.logger import setup_logger


def summarize_reports(results_dir: str) -> int:
    """Print every report found under a result directory; returns how many failed."""
    evaluator = ReportEvaluator()
    failed = 0
    for path in sorted(glob.glob(os.path.join(results_dir, "**", "*_report.json"), recursive=True)):
        report = ExperimentReport.load(path)
        print(f"== {os.path.relpath(path, results_dir)}")
        print(evaluator.render(report))
        print()
        failed += 0 if report.passed else 1
    return failed


def main():
    parser = argparse.ArgumentParser(description="Compare and summarise experiment results")
    parser.add_argument("results_dir", type=str, help="Directory of experiment results")
    parser.add_argument("--against", type=str, help="Second result directory whose table bodies must match")
    parser.add_argument("--output", type=str, help="Path to write the comparison as JSON")
    args = parser.parse_args()

    logger = setup_logger(name="evaluate")

    if not os.path.isdir(args.results_dir):
        logger.error(f"Results directory not found: {args.results_dir}")
        return 1

    failed = summarize_reports(args.results_dir)
    status = 0 if failed == 0 else 1

    if args.against:
        comparison = compare_result_dirs(args.results_dir, args.against)
        print(f"Compared {comparison['compared']} tables: "
              f"{'identical' if comparison['identical'] else 'DIFFERENT'}")
        for name in comparison["mismatched"]:
            print(f"  differs: {name}")
        for name in comparison["missing"]:
            print(f"  only in one directory: {name}")
        if args.output:
            save_json(comparison, args.output)
            logger.info(f"Comparison saved to {args.output}")
        if not comparison["identical"]:
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
