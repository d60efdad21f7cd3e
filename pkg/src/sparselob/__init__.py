"""Event-driven simulator for sparse limit order books."""

__version__ = "0.1.0"
