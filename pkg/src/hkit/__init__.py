"""Geometric phases of open and closed quantum systems from dynamical invariants."""
from __future__ import annotations

__version__ = "0.1.0"
