"""Event-based non-intrusive load monitoring with V-I trajectory wave-shape features."""

__version__ = "0.1.0"
