"""Level-set fictitious-domain finite elements on structured 2D meshes.

The package builds unfitted finite element discretizations where the
computational domain is described by a level-set function on a simple
structured background mesh.  Boundary and interface conditions enter
either through a product ansatz with the level set or through strip
penalties, stabilized by ghost-penalty and cell-wise least-squares
terms, so no boundary-fitted mesh generation is ever needed.

Modules
-------
levelsets
    Analytic level sets of the shipped geometries and FE interpolation.
mesh
    Structured background mesh, active-cell extraction, facet marking.
spaces
    Lagrange spaces (P0/P1/P2, scalar to tensor valued) on cell subsets.
assembly
    Quadrature batches, exact field algebra, block system assembly.
elasticity
    Plane-strain forms, ghost penalty and least-squares kernels.
schemes
    The six solvers: direct/dual Dirichlet, mixed, interface, crack, heat.
manufactured
    Manufactured cases, error norms, convergence reports and orders.
cli
    Command line runner writing CSV/JSON convergence reports.
"""

from . import assembly, elasticity, levelsets, manufactured, mesh, spaces
from .manufactured import (ConvergenceReport, case_crack, case_dirichlet,
                           case_heat, case_interface, case_mixed,
                           compute_errors, fit_order, time_errors)
from .schemes import (ProblemSpec, solve_crack, solve_dirichlet_direct,
                      solve_dirichlet_dual, solve_heat, solve_interface,
                      solve_mixed)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "ProblemSpec",
    "assembly",
    "case_crack",
    "case_dirichlet",
    "case_heat",
    "case_interface",
    "case_mixed",
    "compute_errors",
    "elasticity",
    "fit_order",
    "levelsets",
    "manufactured",
    "mesh",
    "spaces",
    "solve_crack",
    "solve_dirichlet_direct",
    "solve_dirichlet_dual",
    "solve_heat",
    "solve_interface",
    "solve_mixed",
    "time_errors",
]
