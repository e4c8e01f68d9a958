"""Simulation modules: experiment configs, runners, suites and reports."""
