"""Structured triangular background meshes and level-set cell classification.

The background mesh covers the unit square with N x N squares, each split
into two triangles along the diagonal from the lower-left to the upper-right
corner. All submesh extraction (active cells, boundary strip, Dirichlet /
Neumann / crack markings, ghost facets, fictitious boundaries) happens here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh parameters or degenerate geometry."""


# local edge numbering of a triangle, shared with the P2 basis ordering
LOCAL_EDGES = np.array([[0, 1], [1, 2], [0, 2]], dtype=np.int64)


class BackgroundMesh:
    """Uniform triangulation of the unit square with 2*N^2 cells.

    Vertices are numbered row by row, cells square by square (lower triangle
    first), facets in lexicographic order of their sorted vertex pairs. All
    numberings are deterministic functions of N.
    """

    def __init__(self, N: int):
        if N < 1:
            raise MeshError(f"subdivision count must be >= 1, got {N}")
        self.N = int(N)
        self.h = np.sqrt(2.0) / N

        # vertices on a (N+1) x (N+1) grid
        xs = np.linspace(0.0, 1.0, N + 1)
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        self.vertices = np.column_stack([X.ravel(), Y.ravel()])

        # two CCW triangles per square: (a,b,c) below the diagonal, (a,c,d) above
        ix, iy = np.meshgrid(np.arange(N), np.arange(N), indexing="xy")
        ix = ix.ravel()
        iy = iy.ravel()
        a = iy * (N + 1) + ix
        b = a + 1
        c = a + N + 2
        d = a + N + 1
        lower = np.column_stack([a, b, c])
        upper = np.column_stack([a, c, d])
        cells = np.empty((2 * N * N, 3), dtype=np.int64)
        cells[0::2] = lower
        cells[1::2] = upper
        self.cells = cells

        # unique facets from the per-cell edges, in the LOCAL_EDGES order
        edges = cells[:, LOCAL_EDGES]          # (nc, 3, 2)
        edges = np.sort(edges.reshape(-1, 2), axis=1)
        facets, inverse = np.unique(edges, axis=0, return_inverse=True)
        self.facets = facets
        self.cell_facets = inverse.reshape(-1, 3)

        # facet -> incident cells, lower cell index first, -1 if boundary
        nf = len(facets)
        facet_cells = np.full((nf, 2), -1, dtype=np.int64)
        cell_ids = np.repeat(np.arange(len(cells), dtype=np.int64), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_facets = inverse[order]
        sorted_cells = cell_ids[order]
        first = np.searchsorted(sorted_facets, np.arange(nf))
        counts = np.bincount(sorted_facets, minlength=nf)
        facet_cells[:, 0] = sorted_cells[first]
        second = counts == 2
        facet_cells[second, 1] = sorted_cells[first[second] + 1]
        two = facet_cells[second]
        facet_cells[second] = np.sort(two, axis=1)
        self.facet_cells = facet_cells

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    def cell_maps(self, cells):
        """Affine maps x = x0 + B @ xi for the given cells.

        Returns (x0, B, invB, detB) with shapes (n,2), (n,2,2), (n,2,2), (n,).
        """
        v = self.vertices[self.cells[cells]]            # (n, 3, 2)
        x0 = v[:, 0]
        B = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        detB = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
        invB = np.empty_like(B)
        invB[:, 0, 0] = B[:, 1, 1]
        invB[:, 0, 1] = -B[:, 0, 1]
        invB[:, 1, 0] = -B[:, 1, 0]
        invB[:, 1, 1] = B[:, 0, 0]
        invB /= detB[:, None, None]
        return x0, B, invB, detB

    def facet_geometry(self, facets):
        """Tangent lengths, midpoints and vertex coordinates of facets."""
        pts = self.vertices[self.facets[facets]]        # (n, 2, 2)
        tangents = pts[:, 1] - pts[:, 0]
        lengths = np.linalg.norm(tangents, axis=1)
        midpoints = 0.5 * (pts[:, 0] + pts[:, 1])
        return pts, lengths, midpoints

    def boundary_facets_of_box(self):
        """Facets lying on the boundary of the unit square."""
        return np.nonzero(self.facet_cells[:, 1] == -1)[0]


def build_background_mesh(N: int) -> BackgroundMesh:
    """Build the structured unit-square mesh with mesh size sqrt(2)/N."""
    return BackgroundMesh(N)


def classify_cell(node_values) -> str:
    """Sign status of one cell from the nodal values of the level set.

    Zeros count as sign changes, so a cell with a nodal zero is 'mixed'.
    """
    v = np.asarray(node_values)
    if np.all(v < 0):
        return "all_negative"
    if np.all(v > 0):
        return "all_positive"
    return "mixed"


def _classify_all(node_values):
    neg = np.all(node_values < 0, axis=1)
    pos = np.all(node_values > 0, axis=1)
    mixed = ~(neg | pos)
    return neg, pos, mixed


@dataclass
class ActiveMeshSet:
    """Background mesh plus all level-set derived cell and facet sets.

    Cell sets are sorted integer arrays of background cell indices. Unused
    sets stay empty; which ones are filled depends on the extraction mode
    and on the marking calls made afterwards.
    """

    background: BackgroundMesh
    mode: str
    active_cells: np.ndarray
    gamma_cells: np.ndarray
    dirichlet_cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    neumann_cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    side1_cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    side2_cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    crack_cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    internal_cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    ghost_facets: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    boundary_facets: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    ghost_tags: dict = field(default_factory=dict)
    boundary_tags: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        """Debug dump with plain lists, suitable for json.dump."""
        out = {
            "N": self.background.N,
            "mode": self.mode,
            "active_cells": self.active_cells.tolist(),
            "gamma_cells": self.gamma_cells.tolist(),
            "dirichlet_cells": self.dirichlet_cells.tolist(),
            "neumann_cells": self.neumann_cells.tolist(),
            "side1_cells": self.side1_cells.tolist(),
            "side2_cells": self.side2_cells.tolist(),
            "crack_cells": self.crack_cells.tolist(),
            "internal_cells": self.internal_cells.tolist(),
            "ghost_facets": self.ghost_facets.tolist(),
            "boundary_facets": self.boundary_facets.tolist(),
            "ghost_tags": {k: v.tolist() for k, v in self.ghost_tags.items()},
            "boundary_tags": {k: v.tolist() for k, v in self.boundary_tags.items()},
        }
        return out


def extract_active_set(bg: BackgroundMesh, phi_h, mode: str) -> ActiveMeshSet:
    """Classify cells by the sign of the interpolated level set.

    boundary mode: active = cells touching {phi_h < 0}, gamma = sign-change
    cells. interface mode: side1 = cells touching {phi_h > 0}, side2 = cells
    touching {phi_h < 0}, gamma = their overlap; all cells stay active.
    """
    values = phi_h.cell_node_values()
    if values.shape[0] != bg.n_cells:
        raise MeshError("level-set interpolant does not live on this mesh")
    neg, pos, mixed = _classify_all(values)
    all_cells = np.arange(bg.n_cells, dtype=np.int64)

    if mode == "boundary":
        active = all_cells[neg | mixed]
        gamma = all_cells[mixed]
        if len(active) == 0:
            raise MeshError("degenerate geometry: no active cells")
        ams = ActiveMeshSet(bg, mode, active, gamma)
        ams.ghost_facets = _ghost_facets(bg, active, gamma)
        ams.boundary_facets = _one_sided_facets(bg, active)
        return ams

    if mode == "interface":
        side1 = all_cells[pos | mixed]
        side2 = all_cells[neg | mixed]
        gamma = all_cells[mixed]
        if len(side1) == 0 or len(side2) == 0:
            raise MeshError("degenerate geometry: one interface side is empty")
        ams = ActiveMeshSet(bg, mode, all_cells, gamma,
                            side1_cells=side1, side2_cells=side2)
        ams.ghost_tags["side1"] = _ghost_facets(bg, side1, gamma)
        ams.ghost_tags["side2"] = _ghost_facets(bg, side2, gamma)
        boundary_subsets(ams, "interface")
        return ams

    raise MeshError(f"unknown extraction mode {mode!r}")


def _cell_sample_points(bg: BackgroundMesh, cells):
    """Vertices plus edge midpoints of each cell, shape (n, 6, 2)."""
    v = bg.vertices[bg.cells[cells]]
    mids = 0.5 * (v[:, LOCAL_EDGES[:, 0]] + v[:, LOCAL_EDGES[:, 1]])
    return np.concatenate([v, mids], axis=1)


def mark_by_secondary(bg: BackgroundMesh, gamma_cells, psi):
    """Split gamma cells by the sign of psi at vertices and edge midpoints.

    Returns (nonpositive_cells, nonnegative_cells); cells where psi changes
    sign strictly belong to neither set and stay unmarked.
    """
    pts = _cell_sample_points(bg, gamma_cells)
    vals = psi(pts.reshape(-1, 2)).reshape(len(gamma_cells), -1)
    nonpos = gamma_cells[np.all(vals <= 0, axis=1)]
    nonneg = gamma_cells[np.all(vals >= 0, axis=1)]
    return nonpos, nonneg


def mark_dirichlet_neumann(ams: ActiveMeshSet, psi) -> ActiveMeshSet:
    """Mark gamma cells as Dirichlet (psi <= 0) or Neumann (psi >= 0)."""
    nonpos, nonneg = mark_by_secondary(ams.background, ams.gamma_cells, psi)
    ams.dirichlet_cells = nonpos
    ams.neumann_cells = nonneg
    boundary_subsets(ams, ams.mode)
    return ams


def mark_crack(ams: ActiveMeshSet, psi) -> ActiveMeshSet:
    """Mark gamma cells as fictitious interface (psi <= 0) or crack (psi >= 0)."""
    nonpos, nonneg = mark_by_secondary(ams.background, ams.gamma_cells, psi)
    ams.internal_cells = nonpos
    ams.crack_cells = nonneg
    boundary_subsets(ams, "crack")
    return ams


def _membership(n, cells):
    mask = np.zeros(n, dtype=bool)
    mask[cells] = True
    return mask


def _ghost_facets(bg: BackgroundMesh, active, gamma):
    """Facets internal to the active mesh touching at least one gamma cell."""
    act = _membership(bg.n_cells, active)
    gam = _membership(bg.n_cells, gamma)
    fc = bg.facet_cells
    internal = (fc[:, 1] >= 0) & act[fc[:, 0]] & act[fc[:, 1]]
    touches = np.zeros(bg.n_facets, dtype=bool)
    valid = fc[:, 0] >= 0
    touches[valid] |= gam[fc[valid, 0]]
    second = fc[:, 1] >= 0
    touches[second] |= gam[fc[second, 1]]
    return np.nonzero(internal & touches)[0].astype(np.int64)


def ghost_facet_set(ams: ActiveMeshSet) -> np.ndarray:
    """Ghost facet set of the boundary-mode active mesh."""
    return _ghost_facets(ams.background, ams.active_cells, ams.gamma_cells)


def _one_sided_facets(bg: BackgroundMesh, cells):
    """Facets with exactly one incident cell from the given set."""
    mask = _membership(bg.n_cells, cells)
    fc = bg.facet_cells
    in0 = mask[fc[:, 0]]
    in1 = (fc[:, 1] >= 0) & mask[np.where(fc[:, 1] >= 0, fc[:, 1], 0)]
    return np.nonzero(in0 ^ in1)[0].astype(np.int64)


def _incident_cell_inside(bg: BackgroundMesh, facets, cells):
    """For one-sided facets, the unique incident cell belonging to the set."""
    mask = _membership(bg.n_cells, cells)
    fc = bg.facet_cells[facets]
    first_in = mask[fc[:, 0]]
    inside = np.where(first_in, fc[:, 0], fc[:, 1])
    return inside


def boundary_subsets(ams: ActiveMeshSet, mode: str) -> dict:
    """Tag fictitious-boundary facets by the marking of their inner cell."""
    bg = ams.background
    tags: dict = {}
    if mode == "boundary":
        bfacets = _one_sided_facets(bg, ams.active_cells)
        ams.boundary_facets = bfacets
        inner = _incident_cell_inside(bg, bfacets, ams.active_cells)
        if len(ams.neumann_cells) or len(ams.dirichlet_cells):
            neu = _membership(bg.n_cells, ams.neumann_cells)
            dirc = _membership(bg.n_cells, ams.dirichlet_cells)
            tags["neumann"] = bfacets[neu[inner]]
            tags["dirichlet"] = bfacets[dirc[inner]]
    elif mode in ("interface", "crack"):
        box = np.zeros(bg.n_facets, dtype=bool)
        box[bg.boundary_facets_of_box()] = True
        for name, cells in (("side1", ams.side1_cells), ("side2", ams.side2_cells)):
            bf = _one_sided_facets(bg, cells)
            bf = bf[~box[bf]]
            tags[name] = bf
            if mode == "crack":
                inner = _incident_cell_inside(bg, bf, cells)
                internal = _membership(bg.n_cells, ams.internal_cells)
                crack = _membership(bg.n_cells, ams.crack_cells)
                tags[name + "_int"] = bf[internal[inner]]
                tags[name + "_f"] = bf[crack[inner]]
        ams.boundary_facets = np.unique(np.concatenate([tags["side1"], tags["side2"]]))
    else:
        raise MeshError(f"unknown boundary mode {mode!r}")
    ams.boundary_tags.update(tags)
    return tags


def facet_normals(bg: BackgroundMesh, facets, toward_cells):
    """Unit facet normals pointing out of the given incident cells."""
    pts, _, midpoints = bg.facet_geometry(facets)
    t = pts[:, 1] - pts[:, 0]
    n = np.column_stack([t[:, 1], -t[:, 0]])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    centroids = bg.vertices[bg.cells[toward_cells]].mean(axis=1)
    flip = np.sum(n * (midpoints - centroids), axis=1) < 0
    n[flip] *= -1.0
    return n
