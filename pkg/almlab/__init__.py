"""Augmented Lagrangian solver and multiplier diagnostics for convex composite problems."""

__version__ = "0.1.0"
