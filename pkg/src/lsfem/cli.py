"""Command line runner for the shipped convergence cases.

Each case couples a manufactured problem with one solver and a default
refinement sweep.  `run` executes the sweep and writes a CSV report plus
a JSON summary with fitted convergence orders; `list-cases` prints the
registry.  Exit codes: 0 success, 1 solver failure (with a diagnostic
JSON), 2 usage errors such as an unknown case.
"""

import json
import os
import sys

import click
import numpy as np

from .assembly import SolverError
from .manufactured import (ConvergenceReport, case_crack, case_dirichlet,
                           case_heat, case_interface, case_mixed,
                           compute_errors, time_errors)
from .schemes import (ProblemSpec, solve_crack, solve_dirichlet_direct,
                      solve_dirichlet_dual, solve_heat, solve_interface,
                      solve_mixed)

CASES = {
    "dirichlet-direct": {
        "make": case_dirichlet, "solve": solve_dirichlet_direct,
        "Ns": (16, 32, 64, 128),
        "help": "Dirichlet elasticity on the circle, product ansatz",
    },
    "dirichlet-dual": {
        "make": case_dirichlet, "solve": solve_dirichlet_dual,
        "Ns": (16, 32, 64, 128),
        "help": "Dirichlet elasticity on the circle, strip multiplier",
    },
    "mixed": {
        "make": case_mixed, "solve": solve_mixed,
        "Ns": (16, 32, 64, 128),
        "help": "mixed Dirichlet/Neumann split at x=0.5, junction on grid",
    },
    "mixed-unresolved": {
        "make": case_mixed, "solve": solve_mixed,
        "Ns": (17, 33, 65, 129),
        "help": "mixed split with odd N so the junction misses mesh lines",
    },
    "interface": {
        "make": case_interface, "solve": solve_interface,
        "Ns": (10, 20, 40, 80),
        "help": "two-material interface, radial solution, E jump 7/2.28",
    },
    "crack": {
        "make": case_crack, "solve": solve_crack,
        "Ns": (20, 40, 80, 160),
        "help": "cracked domain, sine crack, tip cell on a mesh line",
    },
    "crack-unresolved": {
        "make": case_crack, "solve": solve_crack,
        "Ns": (21, 41, 81, 161),
        "help": "cracked domain with odd N so the tip misses mesh lines",
    },
    "heat-dt-h": {
        "make": case_heat, "solve": solve_heat,
        "Ns": (10, 20, 40, 80), "dt": lambda h: h,
        "help": "heat equation, implicit Euler, dt = h",
    },
    "heat-dt-h2": {
        "make": case_heat, "solve": solve_heat,
        "Ns": (10, 20, 40, 80), "dt": lambda h: 10.0 * h * h,
        "help": "heat equation, implicit Euler, dt = 10 h^2",
    },
}


def _parse_levels(text):
    try:
        levels = tuple(int(p) for p in text.split(",") if p)
    except ValueError:
        raise click.UsageError(f"bad refinement list {text!r}")
    if not levels or any(n < 2 for n in levels):
        raise click.UsageError("refinement levels must be integers >= 2")
    return levels


def _parse_params(pairs):
    out = {}
    for pair in pairs:
        key, sep, val = pair.partition("=")
        if not sep:
            raise click.UsageError(f"--param needs key=value, got {pair!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise click.UsageError(f"--param value {val!r} is not a number")
    return out


@click.group()
def main():
    """Convergence studies for unfitted level-set finite elements."""


@main.command(name="list-cases")
def list_cases():
    """Print the case registry with defaults."""
    for name, entry in CASES.items():
        case = entry["make"]()
        defaults = " ".join(
            f"{k}={case.params[k]:g}" for k in sorted(case.params))
        click.echo(f"{name:18s} k={case.degree}  {entry['help']}; "
                   f"N={','.join(str(n) for n in entry['Ns'])}  {defaults}")


@main.command()
@click.option("--case", "case_name", required=True, help="registered case")
@click.option("--N", "levels", default=None,
              help="comma-separated mesh resolutions, e.g. 16,32,64")
@click.option("--degree", type=int, default=None, help="polynomial degree")
@click.option("--param", "params", multiple=True,
              help="override, key=value, repeatable")
@click.option("--out", "outdir", default=".", show_default=True,
              help="output directory")
@click.option("--json/--no-json", "write_json", default=True,
              help="write the JSON summary")
@click.option("--csv/--no-csv", "write_csv", default=True,
              help="write the CSV report")
@click.option("--seed", type=int, default=0, show_default=True,
              help="seed echoed into the summary")
@click.option("--threads", type=int, default=1, show_default=True,
              help="BLAS thread cap, best effort")
@click.option("--zero-timings", is_flag=True,
              help="record zero timings for byte-identical reruns")
def run(case_name, levels, degree, params, outdir, write_json, write_csv,
        seed, threads, zero_timings):
    """Run one refinement sweep and write reports."""
    entry = CASES.get(case_name)
    if entry is None:
        known = ", ".join(CASES)
        raise click.UsageError(f"unknown case {case_name!r}; known: {known}")
    levels = entry["Ns"] if levels is None else _parse_levels(levels)
    overrides = _parse_params(params)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)

    case = entry["make"]()
    k = degree if degree is not None else case.degree
    echo = dict(case.params)
    echo.update(overrides)
    echo["degree"] = k
    echo["seed"] = seed
    echo["threads"] = threads
    echo["N"] = list(levels)
    if "dt" in entry:
        echo["dt_rule"] = "h" if case_name == "heat-dt-h" else "10h^2"

    os.makedirs(outdir, exist_ok=True)
    report = ConvergenceReport(case_name, params=echo)
    for N in sorted(levels):
        run_params = dict(overrides)
        if "dt" in entry and "dt" not in run_params:
            run_params["dt"] = entry["dt"](np.sqrt(2.0) / N)
        spec = ProblemSpec(case=case, N=N, degree=degree, params=run_params)
        try:
            res = entry["solve"](spec)
        except SolverError as exc:
            diag = {"case": case_name, "params": echo, "N": N,
                    "error": str(exc)}
            path = os.path.join(outdir, f"{case_name}-error.json")
            with open(path, "w") as fh:
                json.dump(diag, fh, indent=2, sort_keys=True)
                fh.write("\n")
            click.echo(f"solver failure at N={N}: {exc}", err=True)
            sys.exit(1)
        if "dt" in entry:
            err = time_errors(res.extras["series"], case, res.extras["dt"])
        else:
            err = compute_errors(res.solution, case, res.ams, res.phi_h)
        report.add_row(
            N=N, h=res.ams.background.h, ndofs=res.ndofs,
            rel_l2=err["rel_l2"], rel_h1=err["rel_h1"],
            assemble_s=0.0 if zero_timings else res.assemble_s,
            solve_s=0.0 if zero_timings else res.solve_s)
        click.echo(f"N={N:4d} ndofs={res.ndofs:8d} "
                   f"rel_l2={err['rel_l2']:.4e} rel_h1={err['rel_h1']:.4e}")

    if write_csv:
        report.to_csv(os.path.join(outdir, f"{case_name}.csv"))
    if write_json:
        with open(os.path.join(outdir, f"{case_name}.json"), "w") as fh:
            json.dump(report.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    orders = report.to_json()["orders"]
    if orders["l2"] is not None:
        click.echo(f"orders: L2 {orders['l2']:.2f}  H1 {orders['h1']:.2f}")


if __name__ == "__main__":
    main()
