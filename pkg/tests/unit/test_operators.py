import unittest
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.errors import FactorizationError
from core.geometry import flat_curve, graph_curve
from core.kernels import KernelContext
from core.operators import (DenseOperator, OperatorCache, apply_rank_one_inverse, assemble_AS, assemble_AstarB,
                            assemble_AstarS, assemble_and_solve_calA_D, assemble_coupling_D, build_operator_cache,
                            dense_solve, estimate_norm, neumann_solve, operator_norm, rank_one_inverse,
                            solve_calA_V)


class TestLinearAlgebra(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(7)
        cls.n = 12
        B = rng.standard_normal((cls.n, cls.n))
        cls.B = 0.6 * B / np.linalg.norm(B, 2)
        cls.A_star = DenseOperator(0.5 * (np.eye(cls.n) - cls.B))
        cls.rhs = rng.standard_normal(cls.n)

    def test_dense_operator_rejects_bad_entries(self):
        with self.assertRaises(ValueError):
            DenseOperator(np.ones(3))
        with self.assertRaises(ValueError):
            DenseOperator(np.array([[1.0, np.nan]]))

    def test_matmul(self):
        op = DenseOperator(np.arange(4.0).reshape(2, 2))
        np.testing.assert_allclose(op @ np.ones(2), [1.0, 5.0])
        self.assertEqual((op.rows, op.cols), (2, 2))

    def test_norm_estimate(self):
        M = np.diag([3.0, 1.0, 0.5, 0.2])
        self.assertAlmostEqual(operator_norm(DenseOperator(M)), 3.0, places=6)
        self.assertAlmostEqual(estimate_norm(lambda x: M @ x, 4, steps=60), 3.0, places=6)
        self.assertAlmostEqual(operator_norm(DenseOperator(np.zeros((3, 3)))), 0.0)

    def test_neumann_solve_matches_direct(self):
        x, report = neumann_solve(self.A_star, self.rhs)
        self.assertTrue(report.converged)
        self.assertLess(report.norm_estimate, 1.0)
        np.testing.assert_allclose(x, np.linalg.solve(self.A_star.entries, self.rhs), atol=1e-8)

    def test_neumann_solve_column_block(self):
        X, report = neumann_solve(self.A_star, np.eye(self.n), tol=1e-12)
        self.assertTrue(report.converged)
        np.testing.assert_allclose(self.A_star.entries @ X, np.eye(self.n), atol=1e-10)

    def test_neumann_zero_rhs(self):
        x, report = neumann_solve(self.A_star, np.zeros(self.n))
        self.assertEqual(report.iterations, 0)
        np.testing.assert_array_equal(x, np.zeros(self.n))

    def test_neumann_reports_divergence(self):
        """A* with ||I - 2A*|| > 1 and a growing mode does not converge."""
        A = DenseOperator(np.diag(np.full(4, -1.0)))
        _, report = neumann_solve(A, np.ones(4), max_iters=50)
        self.assertFalse(report.converged)

    def test_neumann_rides_out_transient_growth(self):
        """A non-normal R with spectral radius 0.9 grows its increments for ~18 iterations before contracting."""
        R = 0.9 * np.eye(3) + np.diag(np.ones(2), 1)
        A = DenseOperator(0.5 * (np.eye(3) - R))
        x, report = neumann_solve(A, np.ones(3), tol=1e-8)
        self.assertTrue(report.converged)
        self.assertGreater(np.argmax(report.trace), 10)
        np.testing.assert_allclose(x, np.linalg.solve(A.entries, np.ones(3)), rtol=1e-6)

    def test_rank_one_inverse(self):
        a = np.array([0.1, -0.3, 0.25, 0.05])
        M = np.eye(4) + np.outer(np.ones(4), a)
        inv = rank_one_inverse(a)
        np.testing.assert_allclose(M @ inv.entries, np.eye(4), atol=1e-14)
        v = np.array([1.0, 2.0, -1.0, 0.5])
        np.testing.assert_allclose(apply_rank_one_inverse(a, v), inv @ v, atol=1e-14)

    def test_rank_one_singular(self):
        a = np.full(4, -0.25)
        with self.assertRaises(FactorizationError):
            rank_one_inverse(a)
        with self.assertRaises(FactorizationError):
            apply_rank_one_inverse(a, np.ones(4))

    def test_dense_solve(self):
        M = np.array([[2.0, 1.0], [1.0, 3.0]])
        np.testing.assert_allclose(dense_solve(M, np.array([3.0, 4.0])), [1.0, 1.0])
        with self.assertRaises(FactorizationError):
            dense_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))


class TestAssembly(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.L = 2 * np.pi
        cls.N = 64
        cls.ctx = KernelContext(cls.L)
        cls.x = cls.L * np.arange(cls.N) / cls.N
        cls.flat_bottom = flat_curve(cls.N, cls.L, height=-1.0)
        cls.wavy_bottom = graph_curve(cls.x, -1.0 + 0.1 * np.cos(cls.x), cls.L)
        cls.surface = graph_curve(cls.x, 0.05 * np.cos(cls.x), cls.L)

    def test_flat_bottom_double_layer_is_half_identity(self):
        A = assemble_AstarB(self.flat_bottom, self.ctx).entries
        np.testing.assert_allclose(A, 0.5 * np.eye(self.N), atol=1e-13)

    def test_wavy_bottom_is_contractive(self):
        A = assemble_AstarB(self.wavy_bottom, self.ctx)
        R = DenseOperator(np.eye(self.N) - 2.0 * A.entries)
        self.assertLess(operator_norm(R), 1.0)

    def test_surface_operators_without_density_jump(self):
        """With the Atwood number at zero both surface operators reduce to I/2."""
        np.testing.assert_allclose(assemble_AS(self.surface, 0.0).entries, 0.5 * np.eye(self.N))
        np.testing.assert_allclose(assemble_AstarS(self.surface, 0.0).entries, 0.5 * np.eye(self.N))

    def test_AS_diagonal_is_half_plus_self_interaction(self):
        """The null-sum diagonal equals 1/2 + A de Re[z_ee / (4 pi i z_e)] and shrinks to 1/2 with de."""
        s = self.surface
        A = assemble_AS(s, 1.0, self.ctx).entries
        self_term = s.param_step * np.real(s.d2 / (4j * np.pi * s.d1))
        np.testing.assert_allclose(np.diag(A) - 0.5, self_term, atol=1e-5)
        self.assertGreater(np.max(np.abs(self_term)), 1e-4)

    def test_AstarS_rows_leave_constants_alone(self):
        """Constants are an eigenvector of A*_S with eigenvalue 1/2 in deep water."""
        A = assemble_AstarS(self.surface, 1.0, self.ctx).entries
        np.testing.assert_allclose(A @ np.ones(self.N), 0.5 * np.ones(self.N), atol=1e-12)

    def test_coupling_shapes(self):
        C, D = assemble_coupling_D(self.surface, self.wavy_bottom, 1.0, self.ctx)
        self.assertEqual(C.entries.shape, (self.N, self.N))
        self.assertEqual(D.entries.shape, (self.N, self.N))

    def test_cache_deep_water(self):
        cache = build_operator_cache(self.ctx, None, "vortex")
        self.assertTrue(cache.deep_water)
        self.assertIsNone(cache.BB_lu)

    def test_cache_dipole_inverts_bottom(self):
        cache = build_operator_cache(self.ctx, self.wavy_bottom, "dipole")
        np.testing.assert_allclose(cache.AstarB_inv @ cache.AstarB.entries, np.eye(self.N), atol=1e-9)
        self.assertIsNone(cache.BB_lu)

    def test_cache_vortex_factorizes_bottom(self):
        cache = build_operator_cache(self.ctx, self.wavy_bottom, "vortex")
        rhs = np.linspace(-1.0, 1.0, self.N)
        np.testing.assert_allclose(cache.BB.entries @ cache.solve_BB(rhs), rhs, atol=1e-10)

    def test_unfactorized_cache(self):
        with self.assertRaises(FactorizationError):
            OperatorCache(ctx=self.ctx, bottom=None).solve_BB(np.ones(3))

    def test_surface_solves_without_density_jump(self):
        rhs = np.sin(self.x)
        np.testing.assert_allclose(solve_calA_V(self.surface, 0.0, None, rhs, self.ctx), 2.0 * rhs, atol=1e-10)
        np.testing.assert_allclose(assemble_and_solve_calA_D(self.surface, 0.0, None, rhs, self.ctx), 2.0 * rhs,
                                   atol=1e-10)

    def test_dipole_surface_solve_with_bottom(self):
        """The preconditioned fixed point solves the coupled system."""
        cache = build_operator_cache(self.ctx, self.wavy_bottom, "dipole")
        C, D = assemble_coupling_D(self.surface, self.wavy_bottom, 1.0, self.ctx)
        rhs = np.cos(2 * self.x)
        x = assemble_and_solve_calA_D(self.surface, 1.0, (C, cache.AstarB_inv, D), rhs, self.ctx, tol=1e-12)
        calA = (assemble_AstarS(self.surface, 1.0, self.ctx).entries
                - C.entries @ cache.AstarB_inv @ D.entries)
        np.testing.assert_allclose(calA @ x, rhs, atol=1e-9)

    def test_atwood_bound(self):
        with self.assertRaises(ValueError):
            assemble_and_solve_calA_D(self.surface, -1.0, None, np.ones(self.N))


if __name__ == '__main__':
    unittest.main()
