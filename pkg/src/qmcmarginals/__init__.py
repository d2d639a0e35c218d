"""Quasi-Monte Carlo marginal estimation with least-squares polynomials."""
