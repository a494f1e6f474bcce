"""Continual-learning benchmark for drifting text streams."""

__version__ = "0.1.0"
