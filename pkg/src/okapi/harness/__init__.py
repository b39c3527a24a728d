"""Workload driver, metrics, offline checkers and experiment presets."""
