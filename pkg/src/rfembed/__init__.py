"""Synthetic wireless-signal generation, representation learning, and pairwise verification."""

__version__ = "0.1.0"
