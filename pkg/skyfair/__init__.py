"""Aerial base station placement simulator (SA-Q-learning, PSO and exhaustive baselines)."""

__version__ = "0.1.0"
