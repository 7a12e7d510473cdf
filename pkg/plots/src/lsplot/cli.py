"""Command line entry points for the report plotting tool."""

import os

import click

from .plotting import NUMERIC_COLUMNS, PlotSpec, ReportError, render


def _parse_curve(text):
    """Split a FILE[:LABEL] argument into (path, label-or-None)."""
    if ":" in text and not os.path.exists(text):
        path, label = text.rsplit(":", 1)
        return path, (label or None)
    return text, None


def _parse_slopes(text):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise click.UsageError(f"cannot parse reference slopes {text!r}, "
                               f"expected comma-separated numbers")


@click.group()
def main():
    """Plot convergence report CSVs."""


@main.command()
@click.option("--csv", "csv_specs", multiple=True, required=True,
              metavar="FILE[:LABEL]",
              help="Report CSV to plot, optionally with a legend label. "
                   "Repeat for several curves.")
@click.option("--x", "x_col", default="h", show_default=True,
              type=click.Choice(NUMERIC_COLUMNS), help="Column on the x axis.")
@click.option("--y", "y_col", default="rel_l2", show_default=True,
              type=click.Choice(NUMERIC_COLUMNS), help="Column on the y axis.")
@click.option("--slopes", default="", metavar="S1,S2,...",
              help="Reference slopes to draw as triangles, e.g. 2,3.")
@click.option("--out", default="convergence.svg", show_default=True,
              type=click.Path(dir_okay=False),
              help="Output figure (.svg default, .png supported).")
@click.option("--title", default=None, help="Optional figure title.")
def plot(csv_specs, x_col, y_col, slopes, out, title):
    """Render one log-log figure from report CSVs with fitted slopes."""
    spec = PlotSpec(curves=tuple(_parse_curve(c) for c in csv_specs),
                    x=x_col, y=y_col, slopes=_parse_slopes(slopes),
                    out=out, title=title)
    try:
        path, fits = render(spec)
    except ReportError as exc:
        raise click.ClickException(str(exc))
    for label, slope in fits:
        click.echo(f"{label}: fitted slope {slope:.6f}")
    click.echo(f"wrote {path}")
