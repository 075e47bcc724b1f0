"""Finite-horizon MDP maneuver planning and reach-avoid verification for
drag-decaying circular orbits."""

__version__ = "0.1.0"

from . import astro, domain, mdp, resonance, verify  # noqa: F401
from .estimators import BackwardInductionSolver, SafetyVerifier  # noqa: F401
