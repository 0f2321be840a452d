"""Safe Bayesian optimization under time-varying rewards and constraints."""

__version__ = "0.1.0"
