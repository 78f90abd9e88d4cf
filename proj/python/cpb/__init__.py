"""Collaborative predictive blacklisting."""

from ._core import bench, ewma_forecast, psi_ca, psi_dt, run_experiment, size_sketch

__all__ = ["bench", "ewma_forecast", "psi_ca", "psi_dt", "run_experiment", "size_sketch"]
