"""Switching hybrid recommender for promoted items."""

__version__ = "0.1.0"
