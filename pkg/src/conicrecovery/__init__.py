"""Convex signal recovery toolkit.

Recovery solvers, conic width estimators, small-ball empirical-process
bounds, and a Monte Carlo phase-transition experiment harness.
"""

__version__ = "0.1.0"
