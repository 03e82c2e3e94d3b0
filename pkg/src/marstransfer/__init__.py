"""Minimum-time low-thrust Earth-to-Mars transfers by multi-phase direct collocation."""

__version__ = "0.1.0"
