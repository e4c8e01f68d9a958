"""Utility modules for logging, JSON and CSV output."""
