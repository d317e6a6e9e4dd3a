"""Belief-space task-motion planning for mobile robot navigation."""

__version__ = "0.1.0"
