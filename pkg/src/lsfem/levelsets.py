"""Level-set descriptions of the computational geometries.

Each geometry is a smooth scalar field phi with the domain of interest on
the side {phi < 0}. Schemes only ever see the Lagrange interpolant of phi;
the analytic field appears in manufactured data and in the interpolation
step itself.
"""

from __future__ import annotations

import numpy as np

from .spaces import FEFunction, FunctionSpace


class LevelSetError(Exception):
    """Invalid geometric parameters."""


class LevelSet:
    """Scalar field with an analytic gradient and a degree hint.

    The degree hint is the polynomial degree that represents the field
    exactly where it is polynomial, and a sensible interpolation degree
    otherwise.
    """

    def __init__(self, fn, grad, degree_hint: int, name: str = "levelset",
                 hess=None):
        self._fn = fn
        self._grad = grad
        self._hess = hess
        self.degree_hint = int(degree_hint)
        self.name = name

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        return self._fn(pts)

    def gradient(self, points):
        pts = np.asarray(points, dtype=float)
        return self._grad(pts)

    def hessian(self, points):
        pts = np.asarray(points, dtype=float)
        if self._hess is None:
            raise LevelSetError(f"{self.name} has no analytic hessian")
        return self._hess(pts)


def _sphere(center, radius2, name):
    cx, cy = center

    def fn(p):
        return (p[..., 0] - cx) ** 2 + (p[..., 1] - cy) ** 2 - radius2

    def grad(p):
        g = np.empty(p.shape)
        g[..., 0] = 2.0 * (p[..., 0] - cx)
        g[..., 1] = 2.0 * (p[..., 1] - cy)
        return g

    def hess(p):
        H = np.zeros(p.shape[:-1] + (2, 2))
        H[..., 0, 0] = 2.0
        H[..., 1, 1] = 2.0
        return H

    return LevelSet(fn, grad, degree_hint=2, name=name, hess=hess)


def circle_levelset() -> LevelSet:
    """Circle of radius sqrt(1/8) centred in the unit square."""
    return _sphere((0.5, 0.5), 0.125, "circle")


def interface_levelset(R: float) -> LevelSet:
    """Circle of radius R centred in the unit square, inner side negative."""
    if R <= 0.0:
        raise LevelSetError(f"interface radius must be positive, got {R}")
    return _sphere((0.5, 0.5), float(R) ** 2, "interface")


def crack_levelsets() -> tuple[LevelSet, LevelSet]:
    """Cracked geometry: primary sine front and secondary crack extent.

    The crack runs along {phi = 0} where {psi > 0}; the remainder of the
    zero set is a fictitious internal interface used only for stitching.
    """

    def fn(p):
        return p[..., 1] - 0.25 * np.sin(2.0 * np.pi * p[..., 0]) - 0.5

    def grad(p):
        g = np.empty(p.shape)
        g[..., 0] = -0.5 * np.pi * np.cos(2.0 * np.pi * p[..., 0])
        g[..., 1] = 1.0
        return g

    def hess(p):
        H = np.zeros(p.shape[:-1] + (2, 2))
        H[..., 0, 0] = np.pi ** 2 * np.sin(2.0 * np.pi * p[..., 0])
        return H

    phi = LevelSet(fn, grad, degree_hint=2, name="crack_front", hess=hess)

    def psi_fn(p):
        return p[..., 0] - 0.5

    def psi_grad(p):
        g = np.zeros(p.shape)
        g[..., 0] = 1.0
        return g

    psi = LevelSet(psi_fn, psi_grad, degree_hint=1, name="crack_extent")
    return phi, psi


def mixed_secondary_levelset() -> LevelSet:
    """Secondary field splitting the circle into Dirichlet and Neumann parts.

    Nonpositive on {x >= 1/2} (Dirichlet side), nonnegative on {x <= 1/2}.
    """

    def fn(p):
        return 0.5 - p[..., 0]

    def grad(p):
        g = np.zeros(p.shape)
        g[..., 0] = -1.0
        return g

    return LevelSet(fn, grad, degree_hint=1, name="mixed_split")


def interpolate(ls: LevelSet, space: FunctionSpace) -> FEFunction:
    """Lagrange interpolant of a level set, the only geometry schemes see."""
    return FEFunction(space, space.interpolate(ls))
