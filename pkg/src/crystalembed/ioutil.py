"""Small shared I/O helpers."""

from __future__ import annotations


def format_float17(x: float) -> str:
    """Format a float with 17 significant digits (lossless for float64)."""
    return f"{float(x):.17g}"
