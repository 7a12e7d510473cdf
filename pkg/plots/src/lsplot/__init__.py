"""Log-log convergence figures from solver report CSVs."""

from .plotting import (
    NUMERIC_COLUMNS,
    SCHEMA,
    PlotSpec,
    ReportError,
    fit_slope,
    read_report,
    render,
)

__all__ = [
    "NUMERIC_COLUMNS",
    "SCHEMA",
    "PlotSpec",
    "ReportError",
    "fit_slope",
    "read_report",
    "render",
]
