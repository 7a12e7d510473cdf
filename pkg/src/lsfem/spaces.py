"""Lagrange finite element spaces on cell subsets of the background mesh.

Supports continuous P1 / P2 and discontinuous P0, scalar or with a vector
or tensor value shape. Degrees of freedom are numbered deterministically:
vertex dofs in ascending vertex order, then edge dofs in ascending facet
order, with value components interleaved innermost.
"""

from __future__ import annotations

import numpy as np

from .mesh import LOCAL_EDGES, BackgroundMesh


class SpaceError(Exception):
    """Unsupported element family or inconsistent interpolation data."""


_REF_NODES = {
    0: np.array([[1 / 3, 1 / 3]]),
    1: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    2: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                 [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]),
}

# barycentric gradients on the reference triangle
_DL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def tabulate(degree: int, points):
    """Reference basis tables at the given points.

    Returns (values, grads, hessians) with shapes (nq, nb), (nq, nb, 2)
    and (nq, nb, 2, 2).
    """
    pts = np.asarray(points, dtype=float)
    nq = len(pts)
    lam = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])

    if degree == 0:
        return (np.ones((nq, 1)), np.zeros((nq, 1, 2)), np.zeros((nq, 1, 2, 2)))

    if degree == 1:
        vals = lam.copy()
        grads = np.broadcast_to(_DL, (nq, 3, 2)).copy()
        return vals, grads, np.zeros((nq, 3, 2, 2))

    if degree == 2:
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        hess = np.empty((nq, 6, 2, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * _DL[i]
            hess[:, i] = 4.0 * np.outer(_DL[i], _DL[i])
        for e, (i, j) in enumerate(LOCAL_EDGES):
            vals[:, 3 + e] = 4.0 * lam[:, i] * lam[:, j]
            grads[:, 3 + e] = 4.0 * (lam[:, j, None] * _DL[i] + lam[:, i, None] * _DL[j])
            hess[:, 3 + e] = 4.0 * (np.outer(_DL[i], _DL[j]) + np.outer(_DL[j], _DL[i]))
        return vals, grads, hess

    raise SpaceError(f"polynomial degree {degree} is not supported")


class FunctionSpace:
    """Lagrange space of a given degree on a subset of background cells."""

    def __init__(self, mesh: BackgroundMesh, scope_cells, degree: int,
                 value_shape=(), continuous: bool = True):
        if degree not in (0, 1, 2):
            raise SpaceError(f"polynomial degree {degree} is not supported")
        if degree == 0 and continuous:
            raise SpaceError("piecewise constants cannot be continuous")
        if degree >= 1 and not continuous:
            raise SpaceError("discontinuous spaces are only supported for degree 0")

        self.mesh = mesh
        self.cells = np.unique(np.asarray(scope_cells, dtype=np.int64))
        if len(self.cells) == 0:
            raise SpaceError("function space needs at least one cell")
        self.degree = degree
        self.value_shape = tuple(value_shape)
        self.ncomp = int(np.prod(self.value_shape)) if self.value_shape else 1
        self.continuous = continuous

        # background cell id -> row in the scope, -1 outside
        self.cell_index = np.full(mesh.n_cells, -1, dtype=np.int64)
        self.cell_index[self.cells] = np.arange(len(self.cells))

        if degree == 0:
            self.n_scalar_dofs = len(self.cells)
            self.cell_dofs = np.arange(len(self.cells), dtype=np.int64)[:, None]
            x0, B, _, _ = mesh.cell_maps(self.cells)
            self.node_points = x0 + B @ np.array([1 / 3, 1 / 3])
            return

        verts = np.unique(mesh.cells[self.cells])
        vmap = np.full(mesh.n_vertices, -1, dtype=np.int64)
        vmap[verts] = np.arange(len(verts))
        vertex_dofs = vmap[mesh.cells[self.cells]]

        if degree == 1:
            self.n_scalar_dofs = len(verts)
            self.cell_dofs = vertex_dofs
            self.node_points = mesh.vertices[verts]
            return

        edges = np.unique(mesh.cell_facets[self.cells])
        emap = np.full(mesh.n_facets, -1, dtype=np.int64)
        emap[edges] = np.arange(len(edges))
        edge_dofs = len(verts) + emap[mesh.cell_facets[self.cells]]
        self.n_scalar_dofs = len(verts) + len(edges)
        self.cell_dofs = np.concatenate([vertex_dofs, edge_dofs], axis=1)
        midpoints = mesh.vertices[mesh.facets[edges]].mean(axis=1)
        self.node_points = np.concatenate([mesh.vertices[verts], midpoints])

    @property
    def ndofs(self) -> int:
        return self.n_scalar_dofs * self.ncomp

    @property
    def nb_scalar(self) -> int:
        return self.cell_dofs.shape[1]

    def local_dofs(self, cells):
        """Scalar cell dof rows for background cell ids inside the scope."""
        rows = self.cell_index[cells]
        if np.any(rows < 0):
            raise SpaceError("requested cells outside the space scope")
        return self.cell_dofs[rows]

    def expanded_dofs(self, cells):
        """Component-expanded dof rows, local layout basis-major."""
        scal = self.local_dofs(cells)
        if self.ncomp == 1:
            return scal
        comp = np.arange(self.ncomp, dtype=np.int64)
        return (scal[:, :, None] * self.ncomp + comp).reshape(len(scal), -1)

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolation of a callable taking points of shape (n, 2)."""
        vals = np.asarray(f(self.node_points), dtype=float)
        if self.ncomp == 1:
            if vals.shape != (self.n_scalar_dofs,):
                vals = vals.reshape(self.n_scalar_dofs)
            return vals.copy()
        expected = (self.n_scalar_dofs,) + self.value_shape
        if vals.shape != expected:
            raise SpaceError(
                f"interpolated values have shape {vals.shape}, expected {expected}")
        return vals.reshape(self.n_scalar_dofs, self.ncomp).ravel()


def build_space(scope, k: int, value_shape=(), continuity: bool = True,
                mesh: BackgroundMesh | None = None) -> FunctionSpace:
    """Build a Lagrange space on a cell scope.

    The scope is either an (mesh, cells) pair or a cell array with the mesh
    passed separately.
    """
    if mesh is None:
        mesh, cells = scope
    else:
        cells = scope
    return FunctionSpace(mesh, cells, k, value_shape, continuity)


class FEFunction:
    """Coefficient vector bound to its function space."""

    def __init__(self, space: FunctionSpace, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.ndofs)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (space.ndofs,):
            raise SpaceError("coefficient vector does not match the space")

    def cell_node_values(self) -> np.ndarray:
        """Scalar nodal values per scope cell, shape (n_cells, nb)."""
        if self.space.ncomp != 1:
            raise SpaceError("nodal value table is only defined for scalars")
        return self.coeffs[self.space.cell_dofs]

    def eval_cells(self, cells, ref_points, derivative: int = 0):
        """Evaluate on given cells at shared reference points.

        derivative 0 returns (nc, nq, *shape), 1 appends a gradient axis,
        2 appends two Hessian axes. Physical derivatives throughout.
        """
        space = self.space
        vals, grads, hess = tabulate(space.degree, ref_points)
        _, _, invB, _ = space.mesh.cell_maps(cells)
        dofs = space.local_dofs(cells)
        coeffs = self.coeffs.reshape(space.n_scalar_dofs, space.ncomp)[dofs]
        if derivative == 0:
            out = np.einsum("qb,nbc->nqc", vals, coeffs)
        elif derivative == 1:
            gp = np.einsum("qbk,nkj->nqbj", grads, invB)
            out = np.einsum("nqbj,nbc->nqcj", gp, coeffs)
        elif derivative == 2:
            hp = np.einsum("nki,qbkl,nlj->nqbij", invB, hess, invB)
            out = np.einsum("nqbij,nbc->nqcij", hp, coeffs)
        else:
            raise SpaceError("derivative order must be 0, 1 or 2")
        if space.ncomp == 1:
            out = out[:, :, 0]
        elif len(space.value_shape) == 2:
            out = out.reshape(out.shape[:2] + space.value_shape + out.shape[3:])
        return out


def interpolate_fn(space: FunctionSpace, f) -> FEFunction:
    """Interpolate a callable into the space and wrap it as a function."""
    return FEFunction(space, space.interpolate(f))
