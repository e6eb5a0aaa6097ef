"""Homogenization of the one-phase Stefan problem in inhomogeneous media.

Obstacle-problem solver, reference solutions, rescaling and front metrics
for desk-scale convergence studies.
"""

__version__ = "0.1.0"
