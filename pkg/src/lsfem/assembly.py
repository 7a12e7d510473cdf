"""Batched assembly of cut finite element forms.

Integrands are built as sums of parts. A part carries value and derivative
tables of one field factor on a batch of cells, together with the dofs it
couples to; parts without dofs represent known data and migrate to the
right-hand side automatically. All bilinear terms are pairings of two such
sums, so mixed blocks and lifting of inhomogeneous data fall out of the
part-by-part expansion without special cases.

Table axis convention: (batch, qpoint, *value_shape, [deriv axes], local_dof).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import BackgroundMesh, facet_normals
from .quadrature import interval_rule, quadrature_rule
from .spaces import FunctionSpace, tabulate


class AssemblyError(Exception):
    """Inconsistent fields or blocks passed to the assembler."""


class SolverError(Exception):
    """Linear solve failed or produced non-finite values."""


DEFAULT_BATCH = 4096


def chunked(cells, size: int = DEFAULT_BATCH):
    """Yield contiguous slices of a cell array to bound table memory."""
    cells = np.asarray(cells)
    for start in range(0, len(cells), size):
        yield cells[start:start + size]


@dataclass
class FieldPart:
    """One additive factor of an integrand on a batch of cells."""

    block: str | None
    dofs: np.ndarray | None      # (nb, nl) block-local dofs, None for data
    vshape: tuple
    d0: np.ndarray               # (nb, nq, *vshape, nl)
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None

    @property
    def is_data(self) -> bool:
        return self.dofs is None


@dataclass
class KnownScalar:
    """Point values and derivatives of a known scalar coefficient."""

    s0: np.ndarray               # (nb, nq)
    s1: np.ndarray | None = None
    s2: np.ndarray | None = None


def _tabulate_phys(space: FunctionSpace, cells, ref_pts, invB, nderiv: int):
    """Scalar basis tables in physical derivatives, (nb, nq, ..., b)."""
    nb = len(cells)
    ref = np.asarray(ref_pts)
    if ref.ndim == 2:
        nq = len(ref)
        v, g, h = tabulate(space.degree, ref)
        v = np.broadcast_to(v, (nb,) + v.shape)
        g = np.broadcast_to(g, (nb,) + g.shape)
        h = np.broadcast_to(h, (nb,) + h.shape)
    else:
        nq = ref.shape[1]
        v, g, h = tabulate(space.degree, ref.reshape(-1, 2))
        v = v.reshape(nb, nq, -1)
        g = g.reshape(nb, nq, -1, 2)
        h = h.reshape(nb, nq, -1, 2, 2)
    out = [np.ascontiguousarray(v), None, None]
    if nderiv >= 1:
        out[1] = np.einsum("nqbk,nkj->nqbj", g, invB, optimize=True)
    if nderiv >= 2:
        out[2] = np.einsum("nki,nqbkl,nlj->nqbij", invB, h, invB, optimize=True)
    return out


class CellBatch:
    """Quadrature data and field constructors on a batch of cells.

    Reference points are shared across the batch for volume rules and
    per-cell for facet traces.
    """

    def __init__(self, mesh: BackgroundMesh, cells, ref_pts, ref_weights=None):
        self.mesh = mesh
        self.cells = np.asarray(cells, dtype=np.int64)
        self.ref_pts = np.asarray(ref_pts)
        x0, B, invB, detB = mesh.cell_maps(self.cells)
        self.invB = invB
        if self.ref_pts.ndim == 2:
            self.phys = x0[:, None, :] + np.einsum(
                "nij,qj->nqi", B, self.ref_pts, optimize=True)
        else:
            self.phys = x0[:, None, :] + np.einsum(
                "nij,nqj->nqi", B, self.ref_pts, optimize=True)
        if ref_weights is not None:
            self.weights = ref_weights[None, :] * np.abs(detB)[:, None]
        else:
            self.weights = None

    @classmethod
    def volume(cls, mesh, cells, degree: int):
        pts, w = quadrature_rule(degree)
        return cls(mesh, cells, pts, w)

    @property
    def nq(self) -> int:
        return self.phys.shape[1]

    def basis(self, space: FunctionSpace, block: str, nderiv: int = 1):
        """Basis field of a space as a single part."""
        tabs = _tabulate_phys(space, self.cells, self.ref_pts, self.invB, nderiv)
        dofs = space.expanded_dofs(self.cells)
        nc = space.ncomp
        if nc == 1:
            d0, d1, d2 = tabs
            # raw tabulation keeps the dof axis before the derivative
            # axes; FieldPart wants it last
            if d1 is not None:
                d1 = np.moveaxis(d1, 2, -1)
            if d2 is not None:
                d2 = np.moveaxis(d2, 2, -1)
            return [FieldPart(block, dofs, (), d0, d1, d2)]
        eye = np.eye(nc)
        nb, nq = self.phys.shape[:2]
        b = tabs[0].shape[2]
        out = []
        for k, t in enumerate(tabs):
            if t is None:
                out.append(None)
                continue
            deriv = t.shape[3:]
            exp = np.einsum("nqb...,ce->nqc...be", t, eye, optimize=True)
            exp = exp.reshape((nb, nq, nc) + deriv + (b * nc,))
            out.append(exp)
        V = space.value_shape
        if len(V) == 2:
            out = [None if t is None else
                   t.reshape((nb, self.nq) + V + t.shape[3:]) for t in out]
        return [FieldPart(block, dofs, V, out[0], out[1], out[2])]

    def known_scalar(self, fef, nderiv: int = 2) -> KnownScalar:
        """Known scalar FE coefficient, e.g. the level-set interpolant."""
        space = fef.space
        tabs = _tabulate_phys(space, self.cells, self.ref_pts, self.invB, nderiv)
        cf = fef.coeffs[space.local_dofs(self.cells)]
        s0 = np.einsum("nqb,nb->nq", tabs[0], cf, optimize=True)
        s1 = s2 = None
        if nderiv >= 1:
            s1 = np.einsum("nqbj,nb->nqj", tabs[1], cf, optimize=True)
        if nderiv >= 2:
            s2 = np.einsum("nqbij,nb->nqij", tabs[2], cf, optimize=True)
        return KnownScalar(s0, s1, s2)

    def known_field(self, fef, nderiv: int = 1):
        """Known FE function as a data part (dof axis of length one)."""
        space = fef.space
        tabs = _tabulate_phys(space, self.cells, self.ref_pts, self.invB, nderiv)
        nc = space.ncomp
        cf = fef.coeffs.reshape(space.n_scalar_dofs, nc)[space.local_dofs(self.cells)]
        d0 = np.einsum("nqb,nbc->nqc", tabs[0], cf, optimize=True)
        d1 = d2 = None
        if nderiv >= 1:
            d1 = np.einsum("nqbj,nbc->nqcj", tabs[1], cf, optimize=True)
        if nderiv >= 2:
            d2 = np.einsum("nqbij,nbc->nqcij", tabs[2], cf, optimize=True)
        V = space.value_shape
        if nc == 1:
            d0 = d0[..., 0]
            d1 = None if d1 is None else d1[:, :, 0]
            d2 = None if d2 is None else d2[:, :, 0]
        tables = [d0, d1, d2]
        tables = [None if t is None else t[..., None] for t in tables]
        return [FieldPart(None, None, V, tables[0], tables[1], tables[2])]

    def data(self, values, vshape: tuple = ()):
        """Pointwise known data from an array of shape (nb, nq, *vshape)."""
        vals = np.asarray(values, dtype=float)
        expected = self.phys.shape[:2] + vshape
        vals = np.broadcast_to(vals, expected)
        return [FieldPart(None, None, vshape, vals[..., None])]

    def data_from(self, f, vshape: tuple = ()):
        """Pointwise known data from a callable of physical coordinates."""
        vals = np.asarray(f(self.phys.reshape(-1, 2)), dtype=float)
        vals = vals.reshape(self.phys.shape[:2] + vshape)
        return self.data(vals, vshape)

    def data_with_derivatives(self, f0, f1=None, f2=None, vshape: tuple = ()):
        """Known data with derivative tables from analytic callables."""
        pts = self.phys.reshape(-1, 2)
        lead = self.phys.shape[:2]

        def tab(f, extra):
            if f is None:
                return None
            v = np.asarray(f(pts), dtype=float)
            return v.reshape(lead + vshape + extra)[..., None]

        return [FieldPart(None, None, vshape, tab(f0, ()),
                          tab(f1, (2,)), tab(f2, (2, 2)))]


class FacetBatch:
    """Quadrature on a batch of facets with traces onto incident cells."""

    def __init__(self, mesh: BackgroundMesh, facets, degree: int):
        self.mesh = mesh
        self.facets = np.asarray(facets, dtype=np.int64)
        t, wt = interval_rule(degree)
        pts, lengths, _ = mesh.facet_geometry(self.facets)
        self.phys = pts[:, 0][:, None, :] + \
            t[None, :, None] * (pts[:, 1] - pts[:, 0])[:, None, :]
        self.weights = wt[None, :] * lengths[:, None]

    def trace(self, cells) -> CellBatch:
        """Cell batch whose reference points hit this facet's quadrature."""
        cells = np.asarray(cells, dtype=np.int64)
        x0, _, invB, _ = self.mesh.cell_maps(cells)
        ref = np.einsum("nij,nqj->nqi", invB, self.phys - x0[:, None, :],
                        optimize=True)
        cb = CellBatch(self.mesh, cells, ref)
        cb.weights = self.weights
        return cb

    def normals(self, toward_cells):
        """Unit normals pointing out of the given incident cells, (nb, 2)."""
        return facet_normals(self.mesh, self.facets, toward_cells)


def eval_jump(mesh, facets, make_values, degree: int = 2):
    """Pointwise jump of an expression across internal facets.

    make_values maps the trace CellBatch of one incident side to point
    values of shape (nb, nq, ...).  The jump is the lower-index cell's
    trace minus the higher-index cell's, a fixed orientation; squared or
    paired jump quantities do not depend on it.
    """
    facets = np.asarray(facets, dtype=np.int64)
    fc = mesh.facet_cells[facets]
    if np.any(fc[:, 1] < 0):
        raise AssemblyError("jump requested on a boundary facet")
    fb = FacetBatch(mesh, facets, degree)
    plus = np.asarray(make_values(fb.trace(fc[:, 0])), dtype=float)
    minus = np.asarray(make_values(fb.trace(fc[:, 1])), dtype=float)
    return plus - minus


def dump_matrix(A, path):
    """Write a sparse matrix in Matrix Market coordinate format."""
    from scipy.io import mmwrite
    mmwrite(str(path), A.tocoo())


# ---------------------------------------------------------------------------
# field algebra


def fadd(*fields):
    out = []
    for f in fields:
        out.extend(f)
    return out


def fscale(field, c):
    out = []
    for p in field:
        tables = []
        for t in (p.d0, p.d1, p.d2):
            if t is None:
                tables.append(None)
            elif np.isscalar(c):
                tables.append(c * t)
            else:
                cc = np.asarray(c)
                cc = cc.reshape(cc.shape + (1,) * (t.ndim - cc.ndim))
                tables.append(cc * t)
        out.append(FieldPart(p.block, p.dofs, p.vshape, *tables))
    return out


def fgrad(field):
    """Shift one derivative axis into the value: scalar->vector, vector->tensor."""
    out = []
    for p in field:
        if p.d1 is None:
            raise AssemblyError("gradient requested but no first derivatives")
        out.append(FieldPart(p.block, p.dofs, p.vshape + (2,), p.d1, p.d2, None))
    return out


def flaplacian(field):
    out = []
    for p in field:
        if p.vshape != () or p.d2 is None:
            raise AssemblyError("laplacian needs a scalar field with second derivatives")
        d0 = p.d2[:, :, 0, 0, :] + p.d2[:, :, 1, 1, :]
        out.append(FieldPart(p.block, p.dofs, (), d0))
    return out


def fmul(ks: KnownScalar, field, nderiv: int = 2):
    """Exact product of a known scalar with a scalar or vector field."""
    out = []
    for p in field:
        s0, s1, s2 = ks.s0, ks.s1, ks.s2
        if p.vshape == ():
            g0 = np.einsum("nq,nql->nql", s0, p.d0, optimize=True)
            g1 = g2 = None
            if nderiv >= 1 and p.d1 is not None and s1 is not None:
                g1 = np.einsum("nq,nqjl->nqjl", s0, p.d1, optimize=True) + \
                    np.einsum("nqj,nql->nqjl", s1, p.d0, optimize=True)
            if nderiv >= 2 and p.d2 is not None and s2 is not None:
                g2 = np.einsum("nq,nqjkl->nqjkl", s0, p.d2, optimize=True) + \
                    np.einsum("nqj,nqkl->nqjkl", s1, p.d1, optimize=True) + \
                    np.einsum("nqk,nqjl->nqjkl", s1, p.d1, optimize=True) + \
                    np.einsum("nqjk,nql->nqjkl", s2, p.d0, optimize=True)
        elif p.vshape == (2,):
            g0 = np.einsum("nq,nqcl->nqcl", s0, p.d0, optimize=True)
            g1 = g2 = None
            if nderiv >= 1 and p.d1 is not None and s1 is not None:
                g1 = np.einsum("nq,nqcjl->nqcjl", s0, p.d1, optimize=True) + \
                    np.einsum("nqj,nqcl->nqcjl", s1, p.d0, optimize=True)
            if nderiv >= 2 and p.d2 is not None and s2 is not None:
                g2 = np.einsum("nq,nqcjkl->nqcjkl", s0, p.d2, optimize=True) + \
                    np.einsum("nqj,nqckl->nqcjkl", s1, p.d1, optimize=True) + \
                    np.einsum("nqk,nqcjl->nqcjkl", s1, p.d1, optimize=True) + \
                    np.einsum("nqjk,nqcl->nqcjkl", s2, p.d0, optimize=True)
        else:
            raise AssemblyError("scalar products support scalar and vector fields")
        out.append(FieldPart(p.block, p.dofs, p.vshape, g0, g1, g2))
    return out


def fcontract(field, w):
    """Contract the last value axis with a vector, e.g. normals or grad phi."""
    out = []
    for p in field:
        if not p.vshape:
            raise AssemblyError("contraction needs at least one value axis")
        ww = np.asarray(w)
        nb, nq = p.d0.shape[:2]
        if ww.ndim == 2:
            ww = ww[:, None, :]
        ww = np.broadcast_to(ww, (nb, nq, 2))
        lhs = "nq" + "ab"[:len(p.vshape) - 1] + "j" + "l"
        rhs = "nq" + "ab"[:len(p.vshape) - 1] + "l"
        d0 = np.einsum(f"{lhs},nqj->{rhs}", p.d0, ww, optimize=True)
        out.append(FieldPart(p.block, p.dofs, p.vshape[:-1], d0))
    return out


def fdiv_tensor(field):
    """Row-wise divergence of a tensor field, needs first derivatives."""
    out = []
    for p in field:
        if p.vshape != (2, 2) or p.d1 is None:
            raise AssemblyError("tensor divergence needs a tensor field with derivatives")
        d0 = p.d1[:, :, :, 0, 0, :] + p.d1[:, :, :, 1, 1, :]
        out.append(FieldPart(p.block, p.dofs, (2,), d0))
    return out


def finalize(field):
    """Flatten value axes: list of (block, dofs, table (nb, nq, D, nl))."""
    out = []
    for p in field:
        nb, nq = p.d0.shape[:2]
        nl = p.d0.shape[-1]
        D = 1
        for s in p.vshape:
            D *= s
        out.append((p.block, p.dofs, p.d0.reshape(nb, nq, D, nl)))
    return out


# ---------------------------------------------------------------------------
# system assembly


class SystemBuilder:
    """Accumulates a block linear system in COO triplets plus a dense rhs."""

    def __init__(self, blocks: dict):
        self.blocks = dict(blocks)
        self.offsets = {}
        total = 0
        for name, n in self.blocks.items():
            self.offsets[name] = total
            total += int(n)
        self.n = total
        self._rows = []
        self._cols = []
        self._vals = []
        self.rhs = np.zeros(total)
        self._bc_mask = np.zeros(total, dtype=bool)
        self._bc_vals = np.zeros(total)

    def _global(self, block, dofs):
        if block not in self.offsets:
            raise AssemblyError(f"unknown block {block!r}")
        return dofs + self.offsets[block]

    def add(self, weights, test_field, trial_field):
        """Bilinear pairing; data parts in the trial move to the rhs."""
        w = np.asarray(weights)
        for tb, td, tt in finalize(test_field):
            if td is None:
                raise AssemblyError("test fields cannot contain data parts")
            gtd = self._global(tb, td)
            for ub, ud, ut in finalize(trial_field):
                if tt.shape[2] != ut.shape[2]:
                    raise AssemblyError("test and trial value dimensions differ")
                if ud is None:
                    r = np.einsum("nq,nqdi,nqd->ni", w, tt, ut[..., 0],
                                  optimize=True)
                    np.subtract.at(self.rhs, gtd, r)
                    continue
                gud = self._global(ub, ud)
                M = np.einsum("nq,nqdi,nqdj->nij", w, tt, ut, optimize=True)
                nb, ni, nj = M.shape
                rows = np.broadcast_to(gtd[:, :, None], (nb, ni, nj))
                cols = np.broadcast_to(gud[:, None, :], (nb, ni, nj))
                self._rows.append(rows.ravel())
                self._cols.append(cols.ravel())
                self._vals.append(M.ravel())

    def add_rhs(self, weights, test_field, data_field):
        """Linear functional pairing a test field with known data."""
        w = np.asarray(weights)
        for tb, td, tt in finalize(test_field):
            if td is None:
                raise AssemblyError("test fields cannot contain data parts")
            gtd = self._global(tb, td)
            for db, dd, dt in finalize(data_field):
                if dd is not None:
                    raise AssemblyError("rhs data must not carry dofs")
                r = np.einsum("nq,nqdi,nqd->ni", w, tt, dt[..., 0], optimize=True)
                np.add.at(self.rhs, gtd, r)

    def set_dirichlet(self, block, dofs, values):
        """Strong constraints enforced by row replacement."""
        g = self._global(block, np.asarray(dofs, dtype=np.int64))
        self._bc_mask[g] = True
        self._bc_vals[g] = values

    def build(self):
        """Assemble the CSC matrix and final rhs with constraints applied."""
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = np.empty(0, np.int64)
            cols = np.empty(0, np.int64)
            vals = np.empty(0)
        if self._bc_mask.any():
            keep = ~self._bc_mask[rows]
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
            bc = np.nonzero(self._bc_mask)[0]
            rows = np.concatenate([rows, bc])
            cols = np.concatenate([cols, bc])
            vals = np.concatenate([vals, np.ones(len(bc))])
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsc()
        b = self.rhs.copy()
        b[self._bc_mask] = self._bc_vals[self._bc_mask]
        return A, b

    def solve(self):
        """Factorize and solve, returning per-block solution vectors."""
        A, b = self.build()
        x = solve_system(A, b)
        out = {}
        for name, nn in self.blocks.items():
            off = self.offsets[name]
            out[name] = x[off:off + nn]
        return out


def factorize_system(A):
    """Sparse LU factorization reusable across right-hand sides.

    Returns a solve callable with the same finiteness and residual
    diagnostics as solve_system.
    """
    try:
        lu = splu(A.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc

    def solve(b):
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverError("solution contains non-finite entries")
        scale = max(np.linalg.norm(b), 1e-300)
        rel = np.linalg.norm(A @ x - b) / scale
        if rel > 1e-7:
            raise SolverError(f"large relative residual {rel:.3e}")
        return x

    return solve


def solve_system(A, b):
    """Sparse LU solve with finiteness and residual diagnostics."""
    return factorize_system(A)(b)


def assemble(contributions, block_layout):
    """Assemble tagged contributions into a matrix and rhs.

    Each contribution is ("bilinear", weights, test, trial),
    ("linear", weights, test, data) or ("dirichlet", block, dofs, values).
    """
    builder = SystemBuilder(block_layout)
    for item in contributions:
        kind = item[0]
        if kind == "bilinear":
            builder.add(item[1], item[2], item[3])
        elif kind == "linear":
            builder.add_rhs(item[1], item[2], item[3])
        elif kind == "dirichlet":
            builder.set_dirichlet(item[1], item[2], item[3])
        else:
            raise AssemblyError(f"unknown contribution kind {kind!r}")
    return builder.build()


