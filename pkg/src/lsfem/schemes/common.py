"""Shared scaffolding for the unfitted schemes.

Holds the problem specification, geometry setup, solution wrappers that
reconstruct the displacement from scheme unknowns, and the stabilization
kernels used by every scheme.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..assembly import FacetBatch, fadd, fcontract, fgrad, fmul, fscale
from ..elasticity import ghost_penalty_kernel
from ..levelsets import interpolate
from ..manufactured import Case
from ..mesh import build_background_mesh, extract_active_set
from ..spaces import FEFunction, FunctionSpace


@dataclass
class ProblemSpec:
    """One scheme run: a case, a mesh resolution and optional overrides."""

    case: Case
    N: int
    degree: int | None = None
    params: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.degree if self.degree is not None else self.case.degree

    def param(self, name):
        if name in self.params:
            return self.params[name]
        return self.case.params[name]


@dataclass
class SchemeResult:
    """Solution plus the geometry and cost data of one scheme run."""

    spec: ProblemSpec
    ams: object
    phi_h: object
    solution: object
    blocks: dict
    ndofs: int
    assemble_s: float
    solve_s: float
    extras: dict = field(default_factory=dict)


def setup_geometry(spec: ProblemSpec, mode: str):
    """Background mesh, level-set interpolant of scheme degree, active sets."""
    mesh = build_background_mesh(spec.N)
    all_cells = np.arange(mesh.n_cells, dtype=np.int64)
    phi_space = FunctionSpace(mesh, all_cells, spec.k)
    phi_h = interpolate(spec.case.levelset, phi_space)
    ams = extract_active_set(mesh, phi_h, mode)
    return mesh, phi_h, ams


class timer:
    """Accumulates wall-clock time of a with-block into .total."""

    def __init__(self):
        self.total = 0.0

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.total += time.perf_counter() - self._t0
        return False


# -- solution wrappers --------------------------------------------------------


class AnalyticField:
    """Closed-form field evaluated like an FE function on mesh cells."""

    def __init__(self, mesh, val, grad):
        self.mesh = mesh
        self.val = val
        self.grad = grad

    def eval_cells(self, cells, ref_pts, derivative: int = 0):
        cells = np.asarray(cells, dtype=np.int64)
        ref = np.asarray(ref_pts)
        x0, B, _, _ = self.mesh.cell_maps(cells)
        if ref.ndim == 2:
            phys = x0[:, None, :] + np.einsum("nij,qj->nqi", B, ref,
                                              optimize=True)
        else:
            phys = x0[:, None, :] + np.einsum("nij,nqj->nqi", B, ref,
                                              optimize=True)
        f = {0: self.val, 1: self.grad}[derivative]
        if f is None:
            raise ValueError("requested derivative not provided")
        out = np.asarray(f(phys.reshape(-1, 2)), dtype=float)
        return out.reshape(phys.shape[:2] + out.shape[1:])


class FESolution:
    """Solution that is directly a finite element function."""

    def __init__(self, fn: FEFunction):
        self.fn = fn

    def eval(self, cells, ref_pts):
        return (self.fn.eval_cells(cells, ref_pts, 0),
                self.fn.eval_cells(cells, ref_pts, 1))


class LiftedSolution:
    """Reconstruction base + phi * w from same-mesh FE functions."""

    def __init__(self, base: FEFunction | None, phi: FEFunction, w: FEFunction):
        self.base = base
        self.phi = phi
        self.w = w

    def eval(self, cells, ref_pts):
        p0 = self.phi.eval_cells(cells, ref_pts, 0)
        p1 = self.phi.eval_cells(cells, ref_pts, 1)
        w0 = self.w.eval_cells(cells, ref_pts, 0)
        w1 = self.w.eval_cells(cells, ref_pts, 1)
        if w0.ndim == 2:                       # scalar field
            val = p0 * w0
            grad = p0[..., None] * w1 + w0[..., None] * p1
        else:
            val = p0[..., None] * w0
            grad = p0[..., None, None] * w1 + np.einsum(
                "nqi,nqj->nqij", w0, p1, optimize=True)
        if self.base is not None:
            val = val + self.base.eval_cells(cells, ref_pts, 0)
            grad = grad + self.base.eval_cells(cells, ref_pts, 1)
        return val, grad


class PairSolution:
    """Two one-sided solutions of an interface or crack problem."""

    def __init__(self, side1, side2):
        self.side1 = side1
        self.side2 = side2


# -- stabilization kernels ------------------------------------------------------


def apply_ghost(builder, mesh, facets, make_disp, lame, coeff, degree):
    """Stress-jump ghost penalty over a facet strip, tolerant of empty strips.

    make_disp maps a trace cell batch to the displacement field on it, so
    reconstructed products and plain basis fields are handled alike.
    """
    facets = np.asarray(facets, dtype=np.int64)
    if len(facets) == 0:
        return
    fb = FacetBatch(mesh, facets, degree)
    ghost_penalty_kernel(builder, fb, make_disp, lame, coeff)


def apply_ghost_scalar(builder, mesh, facets, make_scalar, coeff, degree):
    """Jump penalty of the normal derivative of a scalar field across facets."""
    facets = np.asarray(facets, dtype=np.int64)
    if len(facets) == 0:
        return
    fb = FacetBatch(mesh, facets, degree)
    fc = mesh.facet_cells[facets]
    n = fb.normals(fc[:, 0])

    def dn(cells):
        return fcontract(fgrad(make_scalar(fb.trace(cells))), n)

    jump = fadd(dn(fc[:, 0]), fscale(dn(fc[:, 1]), -1.0))
    builder.add(coeff * fb.weights, jump, jump)


# -- boundary helpers -----------------------------------------------------------


def inner_cells_of_facets(mesh, facets, cell_set):
    """Unique incident cell of each facet belonging to the given set."""
    mask = np.zeros(mesh.n_cells, dtype=bool)
    mask[cell_set] = True
    fc = mesh.facet_cells[facets]
    first_in = mask[fc[:, 0]]
    other = np.where(fc[:, 1] >= 0, fc[:, 1], fc[:, 0])
    return np.where(first_in, fc[:, 0], other)


def boundary_trace(mesh, facets, cell_set, degree):
    """Facet batch, inner-cell trace and outward normals on a boundary set."""
    facets = np.asarray(facets, dtype=np.int64)
    fb = FacetBatch(mesh, facets, degree)
    inner = inner_cells_of_facets(mesh, facets, cell_set)
    n = fb.normals(inner)
    return fb, fb.trace(inner), n


def box_boundary_constraints(space: FunctionSpace, fn, tol: float = 1e-12):
    """Dofs of the space on the outer box boundary with interpolated values."""
    pts = space.node_points
    on = ((pts[:, 0] < tol) | (pts[:, 0] > 1.0 - tol) |
          (pts[:, 1] < tol) | (pts[:, 1] > 1.0 - tol))
    sdofs = np.nonzero(on)[0]
    if len(sdofs) == 0:
        return np.empty(0, np.int64), np.empty(0)
    vals = np.asarray(fn(pts[sdofs]), dtype=float)
    if space.ncomp == 1:
        return sdofs, vals.reshape(-1)
    comp = np.arange(space.ncomp, dtype=np.int64)
    dofs = (sdofs[:, None] * space.ncomp + comp).reshape(-1)
    return dofs, vals.reshape(-1)


def displacement_penalty_combo(phi, basis_u, basis_p, h: float):
    """The combination u - (1/h) phi p used by dual-type Dirichlet terms."""
    return fadd(basis_u, fscale(fmul(phi, basis_p, nderiv=0), -1.0 / h))


def proxy_normal_combo(phi, basis_y, basis_p, h: float):
    """The combination y grad(phi) + (1/h) phi p used by Neumann-type terms."""
    return fadd(fcontract(basis_y, phi.s1),
                fscale(fmul(phi, basis_p, nderiv=0), 1.0 / h))
