"""Tests for the analytic level-set geometries and their interpolants."""

import numpy as np
import pytest

from lsfem import levelsets
from lsfem.levelsets import LevelSetError
from lsfem.mesh import build_background_mesh
from lsfem.quadrature import quadrature_rule
from lsfem.spaces import FunctionSpace


def fd_gradient(fn, pts, eps=1e-6):
    """Central-difference gradient of a scalar field at points (n, 2)."""
    g = np.empty(pts.shape)
    for j in range(2):
        d = np.zeros(2)
        d[j] = eps
        g[..., j] = (fn(pts + d) - fn(pts - d)) / (2.0 * eps)
    return g


def fd_hessian(ls, pts, eps=1e-5):
    """Central differences of the analytic gradient."""
    H = np.empty(pts.shape + (2,))
    for j in range(2):
        d = np.zeros(2)
        d[j] = eps
        H[..., j] = (ls.gradient(pts + d) - ls.gradient(pts - d)) / (2.0 * eps)
    return np.swapaxes(H, -1, -2)


class TestCircle:
    """Circle of radius sqrt(1/8) centred at (1/2, 1/2)."""

    def test_reference_values(self):
        phi = levelsets.circle_levelset()
        assert phi(np.array([0.5, 0.5])) == pytest.approx(-0.125, abs=1e-15)
        assert phi(np.array([0.0, 0.0])) == pytest.approx(0.375, abs=1e-15)
        r = np.sqrt(0.125)
        assert abs(phi(np.array([0.5 + r, 0.5]))) < 1e-15

    def test_zero_on_the_circle(self):
        phi = levelsets.circle_levelset()
        theta = np.linspace(0.0, 2.0 * np.pi, 33)
        r = np.sqrt(0.125)
        pts = np.column_stack([0.5 + r * np.cos(theta),
                               0.5 + r * np.sin(theta)])
        assert np.max(np.abs(phi(pts))) < 1e-15

    def test_sign_convention(self):
        """Interior of the disc is the negative side."""
        phi = levelsets.circle_levelset()
        assert phi(np.array([0.52, 0.48])) < 0.0
        assert phi(np.array([0.9, 0.9])) > 0.0

    def test_gradient_matches_fd(self):
        phi = levelsets.circle_levelset()
        rng = np.random.default_rng(7)
        pts = rng.uniform(0.05, 0.95, size=(50, 2))
        assert np.max(np.abs(phi.gradient(pts) - fd_gradient(phi, pts))) < 1e-8

    def test_hessian_is_twice_identity(self):
        phi = levelsets.circle_levelset()
        pts = np.array([[0.3, 0.3], [0.7, 0.1]])
        H = phi.hessian(pts)
        assert np.allclose(H, 2.0 * np.eye(2)[None], atol=1e-15)


class TestInterface:
    """Parametrized circular interface."""

    def test_radius_parameter(self):
        phi = levelsets.interface_levelset(0.3)
        assert abs(phi(np.array([0.8, 0.5]))) < 1e-15
        assert phi(np.array([0.5, 0.5])) == pytest.approx(-0.09)

    def test_invalid_radius_raises(self):
        with pytest.raises(LevelSetError):
            levelsets.interface_levelset(0.0)
        with pytest.raises(LevelSetError):
            levelsets.interface_levelset(-0.2)

    def test_gradient_matches_fd(self):
        phi = levelsets.interface_levelset(0.3)
        rng = np.random.default_rng(11)
        pts = rng.uniform(0.05, 0.95, size=(50, 2))
        assert np.max(np.abs(phi.gradient(pts) - fd_gradient(phi, pts))) < 1e-8


class TestCrack:
    """Sine-shaped front with a secondary crack-extent field."""

    def test_front_passes_through_zero_set(self):
        phi, _ = levelsets.crack_levelsets()
        x = np.linspace(0.0, 1.0, 21)
        pts = np.column_stack([x, 0.25 * np.sin(2.0 * np.pi * x) + 0.5])
        assert np.max(np.abs(phi(pts))) < 1e-15

    def test_front_gradient_matches_fd(self):
        phi, _ = levelsets.crack_levelsets()
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.05, 0.95, size=(50, 2))
        assert np.max(np.abs(phi.gradient(pts) - fd_gradient(phi, pts))) < 1e-7

    def test_front_hessian_matches_fd(self):
        phi, _ = levelsets.crack_levelsets()
        rng = np.random.default_rng(4)
        pts = rng.uniform(0.05, 0.95, size=(20, 2))
        assert np.max(np.abs(phi.hessian(pts) - fd_hessian(phi, pts))) < 1e-5

    def test_extent_sign(self):
        """Crack half is x > 1/2, fictitious half is x < 1/2."""
        _, psi = levelsets.crack_levelsets()
        assert psi(np.array([0.75, 0.3])) > 0.0
        assert psi(np.array([0.25, 0.3])) < 0.0
        assert abs(psi(np.array([0.5, 0.9]))) < 1e-15


class TestMixedSecondary:
    """Boundary splitting field for the mixed problem."""

    def test_sign_convention(self):
        """Dirichlet side x >= 1/2 is nonpositive."""
        psi = levelsets.mixed_secondary_levelset()
        assert psi(np.array([0.8, 0.5])) < 0.0
        assert psi(np.array([0.2, 0.5])) > 0.0

    def test_gradient(self):
        psi = levelsets.mixed_secondary_levelset()
        pts = np.array([[0.3, 0.4], [0.9, 0.2]])
        assert np.allclose(psi.gradient(pts), [[-1.0, 0.0], [-1.0, 0.0]])

    def test_no_hessian_raises(self):
        psi = levelsets.mixed_secondary_levelset()
        with pytest.raises(LevelSetError):
            psi.hessian(np.array([[0.5, 0.5]]))


class TestInterpolation:
    """Lagrange interpolants of level sets."""

    def test_nodal_exactness(self):
        mesh = build_background_mesh(8)
        cells = np.arange(mesh.n_cells)
        for ls in (levelsets.circle_levelset(), levelsets.crack_levelsets()[0]):
            for degree in (1, 2):
                space = FunctionSpace(mesh, cells, degree)
                phi_h = levelsets.interpolate(ls, space)
                assert np.allclose(phi_h.coeffs, ls(space.node_points),
                                   atol=1e-15)

    def test_quadratic_levelset_exact_in_p2(self):
        """The circle is a polynomial of degree two, so its P2 interpolant
        reproduces it everywhere, not just at nodes."""
        mesh = build_background_mesh(6)
        cells = np.arange(mesh.n_cells)
        phi = levelsets.circle_levelset()
        phi_h = levelsets.interpolate(phi, FunctionSpace(mesh, cells, 2))
        ref, _ = quadrature_rule(5)
        vals = phi_h.eval_cells(cells, ref, 0)
        x0, B, _, _ = mesh.cell_maps(cells)
        phys = x0[:, None, :] + np.einsum("nij,qj->nqi", B, ref)
        assert np.max(np.abs(vals - phi(phys))) < 1e-13
        grads = phi_h.eval_cells(cells, ref, 1)
        assert np.max(np.abs(grads - phi.gradient(phys))) < 1e-12

    def test_p1_interpolant_differs_off_nodes(self):
        """P1 cannot represent the quadratic circle between nodes."""
        mesh = build_background_mesh(8)
        cells = np.arange(mesh.n_cells)
        phi = levelsets.circle_levelset()
        phi_h = levelsets.interpolate(phi, FunctionSpace(mesh, cells, 1))
        ref = np.array([[1 / 3, 1 / 3]])
        vals = phi_h.eval_cells(cells, ref, 0)
        x0, B, _, _ = mesh.cell_maps(cells)
        phys = x0[:, None, :] + np.einsum("nij,qj->nqi", B, ref)
        assert np.max(np.abs(vals - phi(phys))) > 1e-5
