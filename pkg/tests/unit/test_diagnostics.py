import unittest
import os
import sys
import math

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.boundary_solve import build_background
from core.config import PhysParams, RunConfig
from core.diagnostics import (TIMESERIES_COLUMNS, DiagnosticsRecord, circulation_total, energy, hausdorff, mass,
                              mu_compatibility_residual, record, relative_drift, resample_curve)
from core.errors import ConfigurationError
from core.geometry import build_curve, flat_curve, graph_curve
from core.scenarios import initial_state
from core.state import PointVortex, make_state


class TestConservedQuantities(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.L = 2 * np.pi
        cls.N = 64
        cls.params = PhysParams()
        cls.rest = make_state(flat_curve(cls.N, cls.L), np.zeros(cls.N), bottom=flat_curve(cls.N, cls.L, height=-1.0))

    def test_rest_state(self):
        """Still water of depth h0 has mass rho L h0 and energy -rho g h0^2 L / 2."""
        self.assertAlmostEqual(mass(self.rest, self.params), self.L, places=12)
        self.assertAlmostEqual(energy(self.rest, self.params), -math.pi, places=12)

    def test_linear_wave_energy(self):
        """A small linear wave adds rho g A^2 L / 2 to the rest energy in both formulations."""
        A = 1e-2
        for formulation in ("vortex", "dipole"):
            with self.subTest(formulation=formulation):
                cfg = RunConfig(scenario={"A": A, "n_surface": 128, "formulation": formulation})
                state, dynamics = initial_state(cfg)
                excess = energy(state, cfg.physics, dynamics.background) + math.pi
                self.assertAlmostEqual(excess / (0.5 * A**2 * self.L), 1.0, delta=5e-2)

    def test_compatibility_residual(self):
        x = self.L * np.arange(self.N) / self.N
        state = make_state(flat_curve(self.N, self.L), np.sin(x), mode="dipole")
        self.assertLess(mu_compatibility_residual(state), 1e-13)
        with self.assertRaises(ConfigurationError):
            mu_compatibility_residual(self.rest)

    def test_circulation_total(self):
        state = make_state(flat_curve(self.N, self.L), np.full(self.N, 1.0 / self.L),
                           vortices=[PointVortex(1.0 - 0.5j, 0.5)])
        self.assertAlmostEqual(circulation_total(state), 1.5)
        bg = build_background("uniform_gamma_flat", self.L, gamma=2.0)
        dipole = make_state(flat_curve(self.N, self.L), np.zeros(self.N), mode="dipole")
        self.assertAlmostEqual(circulation_total(dipole, bg), 2.0)

    def test_record(self):
        rec = record(self.rest, self.params, cfl=0.1, cfl_max=0.2, fixed_point_iters=3)
        row = rec.as_row()
        self.assertEqual(tuple(row), TIMESERIES_COLUMNS)
        self.assertEqual(row["fixed_point_iters"], 3)
        self.assertEqual(row["compat_residual"], 0.0)


class TestRecords(unittest.TestCase):

    def test_rejects_non_finite(self):
        with self.assertRaises(ValueError):
            DiagnosticsRecord(time=0.0, mass=1.0, energy=float("nan"), cfl=0.0, cfl_max=0.0, circulation=0.0,
                              compat_residual=0.0, fixed_point_iters=1)

    def test_relative_drift(self):
        self.assertAlmostEqual(relative_drift([2.0, 2.1, 1.8]), 0.1)
        self.assertEqual(relative_drift([]), 0.0)
        self.assertAlmostEqual(relative_drift([0.0, 0.3, -0.1]), 0.3)


class TestHausdorff(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.L = 2 * np.pi
        cls.x = cls.L * np.arange(128) / 128
        cls.curve = graph_curve(cls.x, 0.1 * np.cos(cls.x), cls.L)

    def test_resample_stays_on_the_curve(self):
        fine = resample_curve(self.curve, 512)
        np.testing.assert_allclose(fine.imag, 0.1 * np.cos(fine.real), atol=1e-6)

    def test_identical_curves(self):
        self.assertLess(hausdorff(self.curve, self.curve, 2**12), 1e-12)

    def test_shifted_parameterization(self):
        """The distance depends on the point sets, not on where the nodes sit."""
        shifted = graph_curve(self.x + 0.02, 0.1 * np.cos(self.x + 0.02), self.L)
        self.assertLess(hausdorff(self.curve, shifted, 2**14), 1e-5)

    def test_distance_is_measured_to_segments(self):
        """Two samplings of one line are at distance zero however coarse the resampling."""
        flat = flat_curve(32, self.L)
        shifted = flat_curve(32, self.L, x0=0.1)
        self.assertLess(hausdorff(flat, shifted, 16), 1e-12)
        raised = flat_curve(32, self.L, height=0.05, x0=0.1)
        self.assertAlmostEqual(hausdorff(flat, raised, 16), 0.05, places=12)

    def test_amplitude_change(self):
        """Crests 0.01 apart are the farthest pair."""
        other = graph_curve(self.x, 0.11 * np.cos(self.x), self.L)
        self.assertAlmostEqual(hausdorff(self.curve, other, 2**14), 0.01, places=4)

    def test_periods_must_match(self):
        other = build_curve(self.curve.points * 2.0, 2 * self.L)
        with self.assertRaises(ValueError):
            hausdorff(self.curve, other)


if __name__ == '__main__':
    unittest.main()
