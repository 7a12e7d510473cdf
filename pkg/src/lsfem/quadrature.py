"""Quadrature on the reference triangle and reference interval.

Triangle rules are conical products collapsing a tensor Gauss-Jacobi x
Gauss-Legendre grid onto the simplex. They have strictly positive weights
at every degree, which keeps masked error integrals nonnegative.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 64


class QuadratureError(Exception):
    """Requested exactness degree outside the supported range."""


@lru_cache(maxsize=None)
def quadrature_rule(exactness_degree: int):
    """Points and weights on the reference triangle {x,y>=0, x+y<=1}.

    Exact for polynomials up to the requested total degree. Points have
    shape (nq, 2), weights (nq,), and the weights sum to 1/2.
    """
    d = int(exactness_degree)
    if d < 0:
        raise QuadratureError(f"exactness degree must be >= 0, got {d}")
    if d > MAX_DEGREE:
        raise QuadratureError(
            f"exactness degree {d} exceeds the supported maximum {MAX_DEGREE}")
    m = (d + 2) // 2             # m-point Gauss is exact to degree 2m-1
    xj, wj = roots_jacobi(m, 1.0, 0.0)
    xl, wl = roots_legendre(m)
    # map both rules from [-1,1] to [0,1]; the Jacobi weight (1-x) supplies
    # the Jacobian of the collapse (x, t) -> (x, (1-x) t)
    x = 0.5 * (xj + 1.0)
    t = 0.5 * (xl + 1.0)
    X, T = np.meshgrid(x, t, indexing="ij")
    WX, WT = np.meshgrid(wj, wl, indexing="ij")
    points = np.column_stack([X.ravel(), (T * (1.0 - X)).ravel()])
    weights = (WX * WT).ravel() / 8.0
    return points, weights


@lru_cache(maxsize=None)
def interval_rule(exactness_degree: int):
    """Gauss-Legendre points and weights on [0, 1]."""
    d = int(exactness_degree)
    if d < 0:
        raise QuadratureError(f"exactness degree must be >= 0, got {d}")
    if d > MAX_DEGREE:
        raise QuadratureError(
            f"exactness degree {d} exceeds the supported maximum {MAX_DEGREE}")
    m = (d + 2) // 2
    xl, wl = roots_legendre(m)
    return 0.5 * (xl + 1.0), 0.5 * wl
