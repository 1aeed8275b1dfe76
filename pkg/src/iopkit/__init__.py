"""Interaction-order prediction toolkit for temporal graphs."""

__version__ = "0.1.0"
