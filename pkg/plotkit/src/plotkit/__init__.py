"""Offline figure generation for cthmc CSV outputs."""

from .figures import (FigureJob, plot_precision_curves, plot_rmse_curves,
                      plot_trace_hist)
from .io import SchemaError, read_precision, read_rmse, read_samples

__version__ = "0.1.0"

__all__ = [
    "FigureJob",
    "SchemaError",
    "plot_precision_curves",
    "plot_rmse_curves",
    "plot_trace_hist",
    "read_precision",
    "read_rmse",
    "read_samples",
]
