"""Atoms of noncommutative rational functions evaluated in free variables."""

from __future__ import annotations

__version__ = "0.1.0"
