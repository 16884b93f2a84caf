import unittest
import os
import sys
import math

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.boundary_solve import check_compatibility
from core.config import RunConfig, ScenarioSpec
from core.errors import ConfigurationError
from core.geometry import flat_curve
from core.scenarios import (cnoidal_ic, cnoidal_reference, flat_bottom, initial_state, linear_wave_elevation,
                            linear_wave_ic, scenario_ic, stokes2_harmonic, stokes2_ic, wave_frequency)


def _spec(**kwargs) -> ScenarioSpec:
    base = dict(L=2 * math.pi, h0=1.0, g=1.0, n_surface=64)
    base.update(kwargs)
    return ScenarioSpec(**base)


class TestLinearWaves(unittest.TestCase):

    def test_dispersion(self):
        self.assertAlmostEqual(wave_frequency(_spec()), math.sqrt(math.tanh(1.0)))
        self.assertAlmostEqual(wave_frequency(_spec(deep_water=True, k=2.0, L=math.pi)), math.sqrt(2.0))

    def test_linear_wave_ic(self):
        spec = _spec(A=1e-2)
        surface, g = linear_wave_ic(spec)
        x = surface.points.real
        np.testing.assert_allclose(surface.points.imag, 1e-2 * np.cos(x))
        np.testing.assert_allclose(g, 1e-2 * np.sin(x) * wave_frequency(spec), atol=1e-12)
        check_compatibility(surface, g)

    def test_elevation_travels_right(self):
        spec = _spec(A=0.1)
        omega = wave_frequency(spec)
        x = np.linspace(0.0, 2 * math.pi, 9)
        np.testing.assert_allclose(linear_wave_elevation(spec, x + omega, t=1.0), linear_wave_elevation(spec, x))


class TestStokesAndBreaking(unittest.TestCase):

    def test_deep_water_second_harmonic(self):
        """In deep water the cos 2kx amplitude is k A^2 / 2."""
        spec = _spec(A=0.1, deep_water=True)
        self.assertAlmostEqual(stokes2_harmonic(spec), 0.5 * 0.1**2)

    def test_stokes2_surface(self):
        spec = _spec(kind="stokes2", A=0.05)
        surface, g = stokes2_ic(spec)
        x = surface.points.real
        expected = 0.05 * np.cos(x) + stokes2_harmonic(spec) * np.cos(2 * x)
        np.testing.assert_allclose(surface.points.imag, expected)
        check_compatibility(surface, g)

    def test_breaking_dispatch(self):
        surface, g = scenario_ic(_spec(kind="breaking", A=0.5))
        self.assertAlmostEqual(float(np.max(surface.points.imag)), 0.5)
        check_compatibility(surface, g)

    def test_custom_has_no_generator(self):
        with self.assertRaises(ConfigurationError):
            scenario_ic(_spec(kind="custom"))


class TestCnoidal(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.spec = _spec(kind="cnoidal", A=0.1, L=40 * math.pi, n_surface=256)

    def test_surface_has_zero_mean_and_steady_flux(self):
        surface, g = cnoidal_ic(self.spec)
        self.assertAlmostEqual(float(np.mean(surface.points.imag)), 0.0, places=5)
        check_compatibility(surface, g)

    def test_needs_finite_depth(self):
        with self.assertRaises(ConfigurationError):
            cnoidal_reference(_spec(kind="cnoidal", A=0.1, L=40 * math.pi, deep_water=True))


class TestInitialState(unittest.TestCase):

    def test_flat_bottom(self):
        bottom = flat_bottom(_spec(n_bottom=32))
        self.assertEqual(bottom.n_points, 32)
        np.testing.assert_allclose(bottom.points.imag, np.full(32, -1.0))
        self.assertIsNone(flat_bottom(_spec(deep_water=True)))

    def test_vortex_formulation(self):
        cfg = RunConfig(scenario={"n_surface": 64, "formulation": "vortex"})
        state, dynamics = initial_state(cfg)
        self.assertEqual(state.mode, "vortex")
        self.assertEqual(state.bottom_values.shape, (64,))
        self.assertEqual(dynamics.formulation, "vortex")
        self.assertFalse(dynamics.cache.deep_water)

    def test_dipole_formulation_in_deep_water(self):
        cfg = RunConfig(scenario={"n_surface": 64, "deep_water": True})
        state, dynamics = initial_state(cfg)
        self.assertEqual(state.mode, "dipole")
        self.assertIsNone(state.bottom)
        self.assertTrue(dynamics.cache.deep_water)
        self.assertAlmostEqual(float(np.mean(state.density)), 0.0, places=12)

    def test_custom_surface_needs_velocity(self):
        cfg = RunConfig(scenario={"kind": "custom", "n_surface": 32})
        with self.assertRaises(ConfigurationError):
            initial_state(cfg, surface=flat_curve(32, 2 * math.pi))

    def test_custom_surface(self):
        cfg = RunConfig(scenario={"kind": "custom", "n_surface": 32, "formulation": "vortex"})
        state, _ = initial_state(cfg, surface=flat_curve(32, 2 * math.pi), g_normal=np.zeros(32))
        np.testing.assert_allclose(state.density, np.zeros(32), atol=1e-12)


if __name__ == '__main__':
    unittest.main()
