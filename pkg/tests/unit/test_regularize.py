import unittest
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.config import FilterSpec, OffsetSpec
from core.geometry import build_curve, dual_curve, flat_curve, graph_curve, to_dual
from core.kernels import KernelContext
from core.regularize import (assemble_AS_offset, filter_curve_points, filter_symbol, fourier_filter,
                             offset_reach, offset_self_velocity, offset_sources, offset_velocity)
from core.state import make_state


class TestFourierFilter(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.N = 64
        cls.L = 2 * np.pi
        cls.x = cls.L * np.arange(cls.N) / cls.N
        cls.spec = FilterSpec()

    def test_symbol_passes_low_and_cuts_high_modes(self):
        F = filter_symbol(self.N, self.spec)
        self.assertAlmostEqual(F[0], 1.0, places=7)
        self.assertAlmostEqual(F[self.N // 2], 0.0, places=12)
        self.assertTrue(np.all(np.diff(F[: self.N // 2]) <= 0.0))

    def test_keeps_smooth_data(self):
        np.testing.assert_allclose(fourier_filter(np.cos(self.x), self.spec), np.cos(self.x), atol=1e-6)

    def test_removes_grid_mode(self):
        noisy = np.cos(self.x) + 0.1 * (-1.0) ** np.arange(self.N)
        np.testing.assert_allclose(fourier_filter(noisy, self.spec), np.cos(self.x), atol=1e-6)

    def test_complex_input_stays_complex(self):
        out = fourier_filter(np.exp(1j * self.x), self.spec)
        self.assertTrue(np.iscomplexobj(out))

    def test_odd_length(self):
        with self.assertRaises(ValueError):
            fourier_filter(np.ones(63), self.spec)

    def test_curve_filter_keeps_the_drift(self):
        """The linear part x of a graph is not smeared by the periodic filter."""
        noisy = self.x + 1j * (0.1 * np.cos(self.x) + 1e-2 * (-1.0) ** np.arange(self.N))
        c = build_curve(noisy, self.L)
        out = filter_curve_points(c, self.spec)
        np.testing.assert_allclose(out, self.x + 0.1j * np.cos(self.x), atol=1e-6)


class TestCurveOffset(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.N = 64
        cls.L = 2 * np.pi
        cls.ctx = KernelContext(cls.L)
        cls.flat = flat_curve(cls.N, cls.L)

    def test_reach(self):
        spec = OffsetSpec(delta=1.0, eps_factor=0.5)
        expected = self.L / self.N - 0.5 / self.N * self.L / np.pi
        self.assertAlmostEqual(offset_reach(self.flat, spec), expected)

    def test_sources_move_along_normal(self):
        spec = OffsetSpec(delta=2.0, eps_factor=0.0)
        shift = offset_sources(self.flat, spec) - self.flat.points
        np.testing.assert_allclose(shift, np.full(self.N, 2j * self.L / self.N), atol=1e-14)

    def test_flat_sheet_mean_velocity_vanishes(self):
        """A uniform sheet has zero mean slip; the offset fluid trace still gives gamma/2."""
        spec = OffsetSpec(delta=3.0, eps_factor=0.0)
        gamma = np.full(self.N, 0.8)
        dual = dual_curve(self.flat)
        u = offset_self_velocity(self.ctx, self.flat, gamma, dual.points, dual.d1, to_dual(gamma), spec)
        np.testing.assert_allclose(u, np.zeros(self.N), atol=1e-6)

    def test_far_field_unchanged(self):
        spec = OffsetSpec()
        state = make_state(self.flat, np.full(self.N, 0.8))
        self.assertAlmostEqual(offset_velocity(state, spec, 0.1 - 0.8j, ctx=self.ctx), 0.4, places=8)

    def test_operator_without_density_jump(self):
        x = self.L * np.arange(self.N) / self.N
        surface = graph_curve(x, 0.05 * np.cos(x), self.L)
        np.testing.assert_allclose(assemble_AS_offset(self.ctx, surface, 0.0, OffsetSpec()).entries,
                                   0.5 * np.eye(self.N))


if __name__ == '__main__':
    unittest.main()
