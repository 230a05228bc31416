"""Desk-scale laboratory for attention degeneration in time-series transformers."""

__version__ = "0.1.0"
