"""Regime-dependent causal discovery for multivariate time series."""
__version__ = "0.1.0"
