"""Evaluation metrology for video retrieval and detection campaigns."""

__version__ = "0.1.0"
