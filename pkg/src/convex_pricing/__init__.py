"""Convex surrogate losses for off-policy contextual pricing from posted-price data."""
from .core import Dataset, LinearPolicy, PropensityModel, Sample, load_csv, save_csv
from .losses import LossSpec
from .solver import FitResult, SolverConfig, fit_convex, fit_nonconvex

__version__ = "0.1.0"

__all__ = ["Dataset", "LinearPolicy", "PropensityModel", "Sample", "load_csv", "save_csv",
           "LossSpec", "FitResult", "SolverConfig", "fit_convex", "fit_nonconvex"]
