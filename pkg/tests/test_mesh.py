"""Tests for the background mesh and level-set derived cell and facet sets."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lsfem import levelsets
from lsfem.levelsets import LevelSet
from lsfem.mesh import (
    LOCAL_EDGES,
    MeshError,
    build_background_mesh,
    classify_cell,
    extract_active_set,
    facet_normals,
    mark_crack,
    mark_dirichlet_neumann,
)
from lsfem.spaces import FEFunction, FunctionSpace


def interpolant(mesh, ls, degree=2):
    space = FunctionSpace(mesh, np.arange(mesh.n_cells), degree)
    return levelsets.interpolate(ls, space)


def cell_sample_points(mesh, cells):
    """Vertices plus edge midpoints, the P2 node locations of each cell."""
    v = mesh.vertices[mesh.cells[cells]]
    mids = 0.5 * (v[:, LOCAL_EDGES[:, 0]] + v[:, LOCAL_EDGES[:, 1]])
    return np.concatenate([v, mids], axis=1)


def random_quadratic(rng):
    """A random quadratic level set that is negative somewhere inside."""
    c = rng.normal(size=5)
    x0 = rng.uniform(0.25, 0.75, size=2)

    def fn(p):
        x = p[..., 0] - x0[0]
        y = p[..., 1] - x0[1]
        return (c[0] * x * x + c[1] * x * y + c[2] * y * y
                + c[3] * x + c[4] * y - 0.05)

    def grad(p):
        x = p[..., 0] - x0[0]
        y = p[..., 1] - x0[1]
        g = np.empty(p.shape)
        g[..., 0] = 2.0 * c[0] * x + c[1] * y + c[3]
        g[..., 1] = c[1] * x + 2.0 * c[2] * y + c[4]
        return g

    return LevelSet(fn, grad, degree_hint=2, name="random_quadratic")


class TestBackgroundMesh:
    """Counts, geometry and numbering of the structured triangulation."""

    def test_entity_counts(self):
        for N in (1, 2, 5, 16):
            mesh = build_background_mesh(N)
            assert mesh.n_cells == 2 * N * N
            assert mesh.n_vertices == (N + 1) ** 2
            # N(N+1) horizontal + N(N+1) vertical + N^2 diagonal facets
            assert mesh.n_facets == 3 * N * N + 2 * N
            assert len(mesh.boundary_facets_of_box()) == 4 * N

    def test_mesh_size(self):
        assert build_background_mesh(16).h == pytest.approx(np.sqrt(2.0) / 16)

    def test_cells_positively_oriented(self):
        mesh = build_background_mesh(4)
        _, _, _, detB = mesh.cell_maps(np.arange(mesh.n_cells))
        assert np.all(detB > 0)
        assert np.allclose(detB, 1.0 / 16)

    def test_facets_are_cell_edges(self):
        mesh = build_background_mesh(3)
        for f in range(mesh.n_facets):
            fverts = set(mesh.facets[f])
            for c in mesh.facet_cells[f]:
                if c >= 0:
                    assert fverts <= set(mesh.cells[c])

    def test_facet_cells_sorted(self):
        mesh = build_background_mesh(5)
        internal = mesh.facet_cells[mesh.facet_cells[:, 1] >= 0]
        assert np.all(internal[:, 0] < internal[:, 1])

    def test_facet_lengths(self):
        mesh = build_background_mesh(4)
        _, lengths, _ = mesh.facet_geometry(np.arange(mesh.n_facets))
        axis = np.isclose(lengths, 0.25)
        diag = np.isclose(lengths, 0.25 * np.sqrt(2.0))
        assert np.all(axis | diag)
        assert diag.sum() == 16

    def test_invalid_subdivision_raises(self):
        with pytest.raises(MeshError):
            build_background_mesh(0)


class TestClassifyCell:
    """Sign classification of one cell from nodal level-set values."""

    def test_reference_cases(self):
        assert classify_cell([-1.0, -2.0, -0.5]) == "all_negative"
        assert classify_cell([0.3, 1.0, 2.0]) == "all_positive"
        assert classify_cell([-1.0, 0.5, 2.0]) == "mixed"

    def test_nodal_zero_counts_as_mixed(self):
        assert classify_cell([0.0, 1.0, 2.0]) == "mixed"
        assert classify_cell([-1.0, 0.0, -2.0]) == "mixed"
        assert classify_cell([0.0, 0.0, 0.0]) == "mixed"

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6).filter(
        lambda v: v != 0.0), min_size=3, max_size=6))
    def test_matches_sign_logic(self, values):
        status = classify_cell(values)
        if all(v < 0 for v in values):
            assert status == "all_negative"
        elif all(v > 0 for v in values):
            assert status == "all_positive"
        else:
            assert status == "mixed"


class TestBoundaryMode:
    """Active mesh extraction for one-sided domains."""

    def test_constant_negative_keeps_everything(self):
        mesh = build_background_mesh(4)
        phi_h = interpolant(mesh, LevelSet(
            lambda p: -np.ones(p.shape[:-1]),
            lambda p: np.zeros(p.shape), degree_hint=1), degree=1)
        ams = extract_active_set(mesh, phi_h, "boundary")
        assert np.array_equal(ams.active_cells, np.arange(mesh.n_cells))
        assert len(ams.gamma_cells) == 0
        assert len(ams.ghost_facets) == 0
        assert np.array_equal(np.sort(ams.boundary_facets),
                              np.sort(mesh.boundary_facets_of_box()))

    def test_circle_against_brute_force(self):
        """Nodal values of the interpolant equal the analytic level set, so
        classifying the analytic values at the P2 nodes is an independent
        oracle for the cell sets."""
        mesh = build_background_mesh(16)
        phi = levelsets.circle_levelset()
        ams = extract_active_set(mesh, interpolant(mesh, phi, 2), "boundary")

        vals = phi(cell_sample_points(mesh, np.arange(mesh.n_cells)))
        neg = np.all(vals < 0, axis=1)
        pos = np.all(vals > 0, axis=1)
        expected_active = np.nonzero(~pos)[0]
        expected_gamma = np.nonzero(~(neg | pos))[0]
        assert np.array_equal(ams.active_cells, expected_active)
        assert np.array_equal(ams.gamma_cells, expected_gamma)

    def test_p1_circle_against_brute_force(self):
        mesh = build_background_mesh(13)
        phi = levelsets.circle_levelset()
        ams = extract_active_set(mesh, interpolant(mesh, phi, 1), "boundary")
        vals = phi(mesh.vertices[mesh.cells])
        pos = np.all(vals > 0, axis=1)
        neg = np.all(vals < 0, axis=1)
        assert np.array_equal(ams.active_cells, np.nonzero(~pos)[0])
        assert np.array_equal(ams.gamma_cells, np.nonzero(~(neg | pos))[0])

    def test_ghost_facets_against_brute_force(self):
        mesh = build_background_mesh(12)
        phi_h = interpolant(mesh, levelsets.circle_levelset(), 2)
        ams = extract_active_set(mesh, phi_h, "boundary")
        active = set(ams.active_cells.tolist())
        gamma = set(ams.gamma_cells.tolist())
        expected = [
            f for f in range(mesh.n_facets)
            if mesh.facet_cells[f, 1] >= 0
            and set(mesh.facet_cells[f]) <= active
            and (set(mesh.facet_cells[f]) & gamma)
        ]
        assert np.array_equal(ams.ghost_facets, np.array(expected))

    def test_boundary_facets_are_one_sided(self):
        mesh = build_background_mesh(12)
        ams = extract_active_set(
            mesh, interpolant(mesh, levelsets.circle_levelset(), 2),
            "boundary")
        active = np.zeros(mesh.n_cells, dtype=bool)
        active[ams.active_cells] = True
        fc = mesh.facet_cells[ams.boundary_facets]
        in0 = active[fc[:, 0]]
        in1 = (fc[:, 1] >= 0) & active[np.maximum(fc[:, 1], 0)]
        assert np.all(in0 ^ in1)

    def test_active_area_covers_domain(self):
        """The active cells cover {phi_h < 0}; for the circle the P2
        interpolant is exact, so their total area bounds a Monte Carlo
        estimate of the disc area from above."""
        mesh = build_background_mesh(16)
        ams = extract_active_set(
            mesh, interpolant(mesh, levelsets.circle_levelset(), 2),
            "boundary")
        _, _, _, detB = mesh.cell_maps(ams.active_cells)
        active_area = 0.5 * np.abs(detB).sum()
        rng = np.random.default_rng(42)
        pts = rng.uniform(size=(100_000, 2))
        inside = levelsets.circle_levelset()(pts) < 0
        mc = inside.mean()
        mc_std = np.sqrt(mc * (1 - mc) / len(pts))
        assert active_area >= mc - 3 * mc_std
        assert active_area >= np.pi / 8

    def test_empty_domain_raises(self):
        mesh = build_background_mesh(4)
        phi_h = interpolant(mesh, LevelSet(
            lambda p: np.ones(p.shape[:-1]),
            lambda p: np.zeros(p.shape), degree_hint=1), degree=1)
        with pytest.raises(MeshError):
            extract_active_set(mesh, phi_h, "boundary")

    def test_unknown_mode_raises(self):
        mesh = build_background_mesh(4)
        phi_h = interpolant(mesh, levelsets.circle_levelset(), 1)
        with pytest.raises(MeshError):
            extract_active_set(mesh, phi_h, "volume")

    def test_foreign_interpolant_raises(self):
        mesh = build_background_mesh(4)
        other = build_background_mesh(5)
        phi_h = interpolant(other, levelsets.circle_levelset(), 1)
        with pytest.raises(MeshError):
            extract_active_set(mesh, phi_h, "boundary")


class TestInterfaceMode:
    """Two-sided extraction for interface and crack problems."""

    def test_sides_cover_and_overlap_on_gamma(self):
        mesh = build_background_mesh(10)
        ams = extract_active_set(
            mesh, interpolant(mesh, levelsets.interface_levelset(0.3), 2),
            "interface")
        union = np.union1d(ams.side1_cells, ams.side2_cells)
        assert np.array_equal(union, np.arange(mesh.n_cells))
        overlap = np.intersect1d(ams.side1_cells, ams.side2_cells)
        assert np.array_equal(overlap, ams.gamma_cells)

    def test_sign_flip_swaps_sides(self):
        """Negating the level set turns side1 into the one-sided active mesh."""
        mesh = build_background_mesh(10)
        phi_h = interpolant(mesh, levelsets.interface_levelset(0.3), 2)
        neg_h = FEFunction(phi_h.space, -phi_h.coeffs)
        ams = extract_active_set(mesh, phi_h, "interface")
        flipped = extract_active_set(mesh, neg_h, "boundary")
        assert np.array_equal(ams.side1_cells, flipped.active_cells)
        one_sided = extract_active_set(mesh, phi_h, "boundary")
        assert np.array_equal(ams.side2_cells, one_sided.active_cells)

    def test_fictitious_boundaries_exclude_box(self):
        mesh = build_background_mesh(10)
        ams = extract_active_set(
            mesh, interpolant(mesh, levelsets.interface_levelset(0.3), 2),
            "interface")
        box = set(mesh.boundary_facets_of_box().tolist())
        assert not set(ams.boundary_tags["side1"].tolist()) & box
        assert not set(ams.boundary_tags["side2"].tolist()) & box
        assert len(ams.boundary_tags["side2"])

    def test_one_empty_side_raises(self):
        mesh = build_background_mesh(4)
        phi_h = interpolant(mesh, LevelSet(
            lambda p: -np.ones(p.shape[:-1]),
            lambda p: np.zeros(p.shape), degree_hint=1), degree=1)
        with pytest.raises(MeshError):
            extract_active_set(mesh, phi_h, "interface")


class TestMarking:
    """Secondary level-set marking of strip cells."""

    def test_dirichlet_neumann_against_brute_force(self):
        mesh = build_background_mesh(16)
        phi_h = interpolant(mesh, levelsets.circle_levelset(), 2)
        ams = extract_active_set(mesh, phi_h, "boundary")
        psi = levelsets.mixed_secondary_levelset()
        mark_dirichlet_neumann(ams, psi)

        vals = psi(cell_sample_points(mesh, ams.gamma_cells))
        expected_d = ams.gamma_cells[np.all(vals <= 0, axis=1)]
        expected_n = ams.gamma_cells[np.all(vals >= 0, axis=1)]
        assert np.array_equal(ams.dirichlet_cells, expected_d)
        assert np.array_equal(ams.neumann_cells, expected_n)
        assert len(expected_d) and len(expected_n)

    def test_unresolved_split_leaves_straddlers_unmarked(self):
        """On odd meshes the line x = 1/2 cuts through cells, which then
        belong to neither boundary part."""
        mesh = build_background_mesh(17)
        ams = extract_active_set(
            mesh, interpolant(mesh, levelsets.circle_levelset(), 2),
            "boundary")
        mark_dirichlet_neumann(ams, levelsets.mixed_secondary_levelset())
        n_marked = len(ams.dirichlet_cells) + len(ams.neumann_cells)
        assert n_marked < len(ams.gamma_cells)

    def test_boundary_tags_follow_marking(self):
        mesh = build_background_mesh(16)
        ams = extract_active_set(
            mesh, interpolant(mesh, levelsets.circle_levelset(), 2),
            "boundary")
        mark_dirichlet_neumann(ams, levelsets.mixed_secondary_levelset())
        tags = ams.boundary_tags
        assert len(tags["dirichlet"]) and len(tags["neumann"])
        assert not set(tags["dirichlet"].tolist()) & set(tags["neumann"].tolist())
        allb = set(ams.boundary_facets.tolist())
        assert set(tags["dirichlet"].tolist()) <= allb
        assert set(tags["neumann"].tolist()) <= allb

    def test_crack_marking(self):
        mesh = build_background_mesh(20)
        phi, psi = levelsets.crack_levelsets()
        ams = extract_active_set(mesh, interpolant(mesh, phi, 2), "interface")
        mark_crack(ams, psi)
        vals = psi(cell_sample_points(mesh, ams.gamma_cells))
        assert np.array_equal(ams.internal_cells,
                              ams.gamma_cells[np.all(vals <= 0, axis=1)])
        assert np.array_equal(ams.crack_cells,
                              ams.gamma_cells[np.all(vals >= 0, axis=1)])
        for side in ("side1", "side2"):
            sub = set(ams.boundary_tags[side + "_int"].tolist())
            sub |= set(ams.boundary_tags[side + "_f"].tolist())
            assert sub <= set(ams.boundary_tags[side].tolist())


class TestRandomizedLevelSets:
    """Classification invariants over randomized geometries."""

    def test_invariants_hold_for_random_quadratics(self):
        mesh = build_background_mesh(9)
        checked = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            phi_h = interpolant(mesh, random_quadratic(rng), 2)
            try:
                ams = extract_active_set(mesh, phi_h, "boundary")
            except MeshError:
                continue
            checked += 1

            vals = phi_h.cell_node_values()
            neg = np.all(vals < 0, axis=1)
            pos = np.all(vals > 0, axis=1)
            assert np.array_equal(ams.active_cells, np.nonzero(~pos)[0])
            assert np.array_equal(ams.gamma_cells,
                                  np.nonzero(~(neg | pos))[0])
            assert np.all(np.isin(ams.gamma_cells, ams.active_cells))

            active = np.zeros(mesh.n_cells, dtype=bool)
            active[ams.active_cells] = True
            gamma = np.zeros(mesh.n_cells, dtype=bool)
            gamma[ams.gamma_cells] = True
            fc = mesh.facet_cells[ams.ghost_facets]
            assert np.all(fc[:, 1] >= 0)
            assert np.all(active[fc[:, 0]] & active[fc[:, 1]])
            assert np.all(gamma[fc[:, 0]] | gamma[fc[:, 1]])
        assert checked == 20

    def test_extraction_is_deterministic(self):
        mesh = build_background_mesh(9)
        rng = np.random.default_rng(5)
        ls = random_quadratic(rng)
        a = extract_active_set(mesh, interpolant(mesh, ls, 2), "boundary")
        b = extract_active_set(mesh, interpolant(mesh, ls, 2), "boundary")
        assert np.array_equal(a.active_cells, b.active_cells)
        assert np.array_equal(a.gamma_cells, b.gamma_cells)
        assert np.array_equal(a.ghost_facets, b.ghost_facets)
        assert np.array_equal(a.boundary_facets, b.boundary_facets)


class TestFacetNormals:
    """Orientation of facet normals."""

    def test_unit_and_outward(self):
        mesh = build_background_mesh(6)
        internal = np.nonzero(mesh.facet_cells[:, 1] >= 0)[0]
        cells = mesh.facet_cells[internal, 0]
        n = facet_normals(mesh, internal, cells)
        assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
        _, _, mid = mesh.facet_geometry(internal)
        centroids = mesh.vertices[mesh.cells[cells]].mean(axis=1)
        assert np.all(np.sum(n * (mid - centroids), axis=1) > 0)

    def test_flipping_side_negates(self):
        mesh = build_background_mesh(6)
        internal = np.nonzero(mesh.facet_cells[:, 1] >= 0)[0]
        n0 = facet_normals(mesh, internal, mesh.facet_cells[internal, 0])
        n1 = facet_normals(mesh, internal, mesh.facet_cells[internal, 1])
        assert np.allclose(n0, -n1)
