"""Crowd simulation with a learned velocity predictor and a social-force baseline."""

__version__ = "0.1.0"
