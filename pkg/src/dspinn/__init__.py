"""Solvers for steady diffusion problems with piecewise coefficients,
based on subdomain-separated physics-informed networks."""

__version__ = "0.1.0"
