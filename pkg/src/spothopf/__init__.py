"""Hopf thresholds of localized spot patterns in the Schnakenberg model."""

__version__ = "0.1.0"
