"""Lite semantic communication over fading channels."""

__version__ = "0.1.0"
