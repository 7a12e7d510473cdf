"""Log-log convergence figures from solver report CSVs.

The input format is the report schema written by the solver CLI:

    case,N,h,ndofs,rel_l2,rel_h1,assemble_s,solve_s

Reports are read strictly (exact header, rectangular numeric rows) and
rendered as log-log curves with least-squares fitted slopes in the legend
and optional reference-slope triangles. Output is deterministic: the SVG
hash salt is pinned, fonts are kept as text, and no creation date is
embedded, so identical inputs give byte-identical files.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEMA = ("case", "N", "h", "ndofs", "rel_l2", "rel_h1",
          "assemble_s", "solve_s")
NUMERIC_COLUMNS = SCHEMA[1:]

_STYLE = {
    "svg.hashsalt": "lsplot",
    "svg.fonttype": "none",
    "figure.figsize": (5.4, 4.2),
    "figure.dpi": 100,
    "savefig.dpi": 100,
}
_MARKERS = ("o", "s", "^", "d", "v", "*")


class ReportError(Exception):
    """Raised when a report file cannot be used as plot input."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure: curves from CSV reports plus reference slopes."""

    curves: tuple  # of (path, label-or-None)
    x: str = "h"
    y: str = "rel_l2"
    slopes: tuple = field(default_factory=tuple)
    out: str = "convergence.svg"
    title: str = None


def read_report(path):
    """Read one report CSV into numpy columns, validating the schema."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ReportError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise ReportError(f"{path}: empty file")
    header = tuple(rows[0])
    if header != SCHEMA:
        raise ReportError(
            f"{path}: unexpected columns {','.join(header)!r}, expected "
            f"{','.join(SCHEMA)!r}")
    body = rows[1:]
    if not body:
        raise ReportError(f"{path}: no data rows")
    out = {}
    for j, name in enumerate(SCHEMA):
        column = []
        for i, row in enumerate(body):
            if len(row) != len(SCHEMA):
                raise ReportError(
                    f"{path}: row {i + 2} has {len(row)} fields, "
                    f"expected {len(SCHEMA)}")
            column.append(row[j])
        if name == "case":
            out[name] = column
        else:
            try:
                out[name] = np.array([float(v) for v in column])
            except ValueError as exc:
                raise ReportError(
                    f"{path}: non-numeric value in column {name!r}: "
                    f"{exc}") from exc
    return out


def fit_slope(x, y):
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ReportError("slope fit needs at least two rows")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ReportError("log-log slope fit needs positive values")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _curve_label(report, path, label):
    if label:
        return label
    cases = sorted(set(report["case"]))
    if len(cases) == 1:
        return cases[0]
    return Path(path).stem


def _column(report, name, path):
    values = report[name]
    if np.any(values <= 0.0):
        raise ReportError(f"{path}: column {name!r} has non-positive "
                          f"values, cannot plot on a log axis")
    return values


def _slope_triangles(ax, slopes, xs, ys):
    xmin = min(np.min(x) for x in xs)
    xmax = max(np.max(x) for x in xs)
    ymin = min(np.min(y) for y in ys)
    span = xmax / xmin
    x0 = xmin * span ** 0.60
    x1 = xmin * span ** 0.85
    for i, s in enumerate(slopes):
        y0 = ymin * 0.35 ** (i + 1)
        y1 = y0 * (x1 / x0) ** s
        ax.plot([x0, x1, x1, x0], [y0, y0, y1, y0],
                color="0.35", linewidth=0.9)
        ax.text(x1 * 1.06, np.sqrt(y0 * y1), f"{s:g}",
                color="0.35", fontsize=9, verticalalignment="center")


def render(spec: PlotSpec):
    """Render one figure; returns (output path, [(label, slope), ...])."""
    if spec.x not in NUMERIC_COLUMNS or spec.y not in NUMERIC_COLUMNS:
        raise ReportError(
            f"axes must be one of {', '.join(NUMERIC_COLUMNS)}")
    if not spec.curves:
        raise ReportError("no input reports given")
    fits = []
    with matplotlib.rc_context(_STYLE):
        fig, ax = plt.subplots()
        xs, ys = [], []
        for i, (path, label) in enumerate(spec.curves):
            report = read_report(path)
            x = _column(report, spec.x, path)
            y = _column(report, spec.y, path)
            slope = fit_slope(x, y)
            name = _curve_label(report, path, label)
            fits.append((name, slope))
            ax.loglog(x, y, marker=_MARKERS[i % len(_MARKERS)],
                      markersize=4.5, label=f"{name} (slope {slope:.2f})")
            xs.append(x)
            ys.append(y)
        if spec.slopes:
            _slope_triangles(ax, spec.slopes, xs, ys)
        ax.set_xlabel(spec.x)
        ax.set_ylabel(spec.y)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=9)
        fig.tight_layout()
        if spec.out.lower().endswith(".svg"):
            fig.savefig(spec.out, metadata={"Date": None})
        else:
            fig.savefig(spec.out)
        plt.close(fig)
    return spec.out, fits
