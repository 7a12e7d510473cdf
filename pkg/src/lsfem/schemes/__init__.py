"""Unfitted level-set finite element schemes."""

from .common import (AnalyticField, FESolution, LiftedSolution, PairSolution,
                     ProblemSpec, SchemeResult, setup_geometry)
from .crack import solve_crack
from .dirichlet import solve_dirichlet_direct, solve_dirichlet_dual
from .heat import solve_heat
from .interface import solve_interface
from .mixed import solve_mixed

__all__ = [
    "AnalyticField",
    "FESolution",
    "LiftedSolution",
    "PairSolution",
    "ProblemSpec",
    "SchemeResult",
    "setup_geometry",
    "solve_crack",
    "solve_dirichlet_direct",
    "solve_dirichlet_dual",
    "solve_heat",
    "solve_interface",
    "solve_mixed",
]
