"""Simulator for a causally consistent geo-replicated key-value store built on
hybrid clocks and universal stable time, with physical-clock baselines."""

__version__ = "0.1.0"
