"""Augmented Lagrangian (Bregman) iteration for linear inverse problems,
with a harness that measures and certifies its convergence rates."""

from . import core, experiments

__all__ = ["core", "experiments"]
