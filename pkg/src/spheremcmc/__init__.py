"""Dimension-independent MCMC on spheres with angular central Gaussian priors."""

__version__ = "0.1.0"
