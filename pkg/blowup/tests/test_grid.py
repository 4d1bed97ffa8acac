"""
Unit tests for the grid, the discrete Laplacian and its principal eigenpair.
"""
import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blowup.exceptions import EigenSolverError, FieldShapeError, GridError
from blowup.grid import (
    DomainSpec,
    build_operator,
    dirichlet_energy,
    eigen_residual_floor,
    laplacian_matrix,
    principal_eigenpair,
    quadrature,
)
from blowup.tests.utils import interval_operator


class DomainSpecTest(SimpleTestCase):
    """Test cases for DomainSpec validation and geometry."""

    def test_mesh_width(self):
        spec = DomainSpec.interval(1.0, 3)
        self.assertEqual(spec.widths, (0.25,))
        self.assertEqual(spec.n_nodes, 3)
        self.assertEqual(spec.weight, 0.25)

    def test_rectangle_weight_is_product_of_widths(self):
        spec = DomainSpec.rectangle(1.0, 2.0, 4, 3)
        self.assertEqual(spec.n_nodes, 12)
        self.assertAlmostEqual(spec.weight, 0.2 * 0.5)

    def test_nodes_follow_field_order(self):
        spec = DomainSpec.rectangle(1.0, 1.0, 2, 3)
        nodes = spec.nodes()
        self.assertEqual(nodes.shape, (6, 2))
        # x is the slow index
        np.testing.assert_allclose(nodes[:3, 0], 1 / 3)
        np.testing.assert_allclose(nodes[:3, 1], [0.25, 0.5, 0.75])

    def test_rejects_zero_points(self):
        with self.assertRaises(GridError):
            DomainSpec.interval(1.0, 0)

    def test_rejects_nonpositive_extent(self):
        with self.assertRaises(GridError):
            DomainSpec.interval(0.0, 4)
        with self.assertRaises(GridError):
            DomainSpec.rectangle(1.0, -1.0, 4, 4)

    def test_rejects_three_dimensions(self):
        with self.assertRaises(GridError):
            DomainSpec((1.0, 1.0, 1.0), (2, 2, 2))

    def test_grid_error_is_a_value_error(self):
        with self.assertRaises(ValueError):
            DomainSpec.interval(float('nan'), 4)


class LaplacianTest(SimpleTestCase):
    """Test cases for the 3-point and 5-point stencils."""

    def test_action_on_middle_unit_vector(self):
        op = interval_operator(3)
        np.testing.assert_allclose(op.apply([0.0, 1.0, 0.0]), [-16.0, 32.0, -16.0])

    def test_single_node_is_scalar_eight(self):
        op = interval_operator(1)
        self.assertEqual(op.matrix.toarray().tolist(), [[8.0]])

    def test_five_point_stencil(self):
        dense = laplacian_matrix(DomainSpec.rectangle(1.0, 1.0, 3, 3)).toarray()
        centre = 4
        self.assertEqual(dense[centre, centre], 64.0)
        off = np.delete(dense[centre], centre)
        self.assertEqual(sorted(off[off != 0].tolist()), [-16.0] * 4)

    def test_m_matrix(self):
        self.assertTrue(interval_operator(16).is_m_matrix())
        self.assertTrue(build_operator(DomainSpec.rectangle(1.0, 2.0, 5, 4)).is_m_matrix())

    def test_symmetric_under_quadrature(self):
        op = interval_operator(32)
        rng = np.random.default_rng(7)
        f, g = rng.standard_normal(32), rng.standard_normal(32)
        left = op.inner(op.apply(f), g)
        right = op.inner(f, op.apply(g))
        self.assertLessEqual(abs(left - right), 1e-13 * max(abs(left), 1.0))


class EigenpairTest(SimpleTestCase):
    """Test cases for the inverse power iteration."""

    def test_three_nodes_against_dense_solver(self):
        op = interval_operator(3)
        expected = 32 * (1 - math.cos(math.pi / 4))
        self.assertAlmostEqual(op.lambda1, expected, places=10)
        self.assertAlmostEqual(op.lambda1, np.linalg.eigvalsh(op.matrix.toarray())[0], places=10)

    def test_fine_grid_matches_continuum_and_discrete_formula(self):
        op = interval_operator(63)
        h = 1 / 64
        self.assertLessEqual(abs(op.lambda1 - math.pi**2), 0.01)
        self.assertLessEqual(abs(op.lambda1 - 2 / h**2 * (1 - math.cos(math.pi * h))), 1e-8)

    def test_rho_positive_and_normalized(self):
        op = interval_operator(32)
        self.assertTrue(np.all(op.rho1 > 0))
        self.assertAlmostEqual(quadrature(op, op.rho1), 1.0, places=13)

    def test_rho_approaches_continuum_profile(self):
        op = interval_operator(255)
        x = op.spec.nodes()[:, 0]
        np.testing.assert_allclose(op.rho1, math.pi / 2 * np.sin(math.pi * x), atol=1e-4)

    def test_eigen_residual(self):
        op = interval_operator(40)
        lam, rho = principal_eigenpair(op, tol=1e-12)
        residual = np.max(np.abs(op.matrix @ rho - lam * rho))
        self.assertLessEqual(residual, max(1e-12 * lam, eigen_residual_floor(op.matrix)) * np.max(rho))

    def test_fine_grids_converge(self):
        for n in (255, 400):
            op = build_operator(DomainSpec.interval(1.0, n))
            h = 1 / (n + 1)
            self.assertLessEqual(abs(op.lambda1 - 2 / h**2 * (1 - math.cos(math.pi * h))), 1e-8, f"N={n}")
            self.assertTrue(np.all(op.rho1 > 0))

    def test_residual_floor_grows_with_refinement(self):
        coarse = eigen_residual_floor(interval_operator(63).matrix)
        fine = eigen_residual_floor(build_operator(DomainSpec.interval(1.0, 400)).matrix)
        self.assertAlmostEqual(fine / coarse, (401 / 64) ** 2, places=6)

    def test_two_dimensional_eigenvalue(self):
        op = build_operator(DomainSpec.rectangle(1.0, 2.0, 6, 5))
        expected = np.linalg.eigvalsh(op.matrix.toarray())[0]
        self.assertLessEqual(abs(op.lambda1 - expected), 1e-9 * expected)
        self.assertTrue(np.all(op.rho1 > 0))

    def test_non_convergence_reports_iterations(self):
        op = interval_operator(63)
        with self.assertRaises(EigenSolverError) as ctx:
            principal_eigenpair(op, tol=1e-12, max_iterations=1)
        self.assertEqual(ctx.exception.iterations, 1)

    def test_rejects_nonpositive_tolerance(self):
        with self.assertRaises(ValueError):
            principal_eigenpair(interval_operator(3), tol=0)


class QuadratureTest(SimpleTestCase):
    """Test cases for quadrature and the Dirichlet energy."""

    def test_constant_one(self):
        for n in (1, 5, 12):
            op = interval_operator(n)
            self.assertAlmostEqual(quadrature(op, np.ones(n)), n / (n + 1), places=14)

    def test_zero(self):
        op = interval_operator(5)
        self.assertEqual(quadrature(op, np.zeros(5)), 0.0)
        self.assertEqual(dirichlet_energy(op, np.zeros(5)), 0.0)

    def test_dimension_mismatch(self):
        with self.assertRaises(FieldShapeError):
            quadrature(interval_operator(5), np.ones(4))
        with self.assertRaises(FieldShapeError):
            dirichlet_energy(interval_operator(5), np.ones((5, 1)))

    def test_energy_of_eigenvector(self):
        op = interval_operator(20)
        expected = op.lambda1 * op.inner(op.rho1, op.rho1)
        self.assertAlmostEqual(dirichlet_energy(op, op.rho1), expected, delta=1e-10 * expected)

    def test_energy_matches_finite_difference_sum(self):
        op = interval_operator(8)
        h = op.spec.widths[0]
        f = np.random.default_rng(3).standard_normal(8)
        padded = np.concatenate([[0.0], f, [0.0]])
        expected = np.sum(h * (np.diff(padded) / h) ** 2)
        self.assertAlmostEqual(dirichlet_energy(op, f), expected, delta=1e-12 * expected)

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, 16, elements=st.floats(-10, 10, allow_nan=False)))
    def test_poincare_inequality(self, f):
        op = interval_operator(16)
        lower = op.lambda1 * quadrature(op, f * f)
        self.assertGreaterEqual(dirichlet_energy(op, f), lower - 1e-12 * (1 + np.dot(f, f)))
