"""Replay-fidelity audits for archived web pages."""

__version__ = "0.1.0"
