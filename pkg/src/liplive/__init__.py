"""Acoustic lip-motion liveness detection with a scene simulator."""

__version__ = "0.1.0"
