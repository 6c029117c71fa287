"""Convergence laboratory for Parareal and multigrid-reduction-in-time:
two-grid bounds for Runge-Kutta propagator pairs, structural analysis of
explicit schemes, model spectra, and a linear MGRIT simulator that
cross-validates the bounds."""

__version__ = "0.1.0"

from . import bounds, butcher, explicit_analysis, mgrit_sim, model_problems

__all__ = ["bounds", "butcher", "explicit_analysis", "mgrit_sim",
           "model_problems", "__version__"]
