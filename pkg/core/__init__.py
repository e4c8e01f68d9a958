"""Core modules: histories, environments, mixtures, prediction and planning."""
