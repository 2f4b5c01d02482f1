"""Reservoir computing driven by chaotic sources, with synchronization diagnostics."""

__version__ = "0.1.0"
