"""Level repulsion in integrable systems: parametric ensembles, spectral statistics, models and fits."""

__version__ = "0.1.0"
