"""Optimal fluid scheduling for n x n input-queued switches."""

__version__ = "0.1.0"
