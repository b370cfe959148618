"""Disturbance-aware minimum-lap-time references for a single-track race car."""

__version__ = "0.1.0"
