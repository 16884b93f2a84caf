import unittest
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.config import OffsetSpec, PhysParams, RunConfig, StepConfig
from core.diagnostics import mass
from core.errors import ConfigurationError, FixedPointError, GeometryDegenerationError
from core.geometry import flat_curve
from core.kernels import KernelContext
from core.operators import build_operator_cache
from core.scenarios import initial_state
from core.state import make_state
from core.stepper import Dynamics, bootstrap, cfl_max_number, cfl_number, choose_dt, verlet_step


class TestDynamics(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.L = 2 * np.pi
        cls.N = 32
        cls.ctx = KernelContext(cls.L)
        cls.bottom = flat_curve(cls.N, cls.L, height=-1.0)
        cls.cache = build_operator_cache(cls.ctx, cls.bottom, "vortex")

    def test_invalid_combinations(self):
        with self.assertRaises(ConfigurationError):
            Dynamics("spectral", PhysParams(), self.cache)
        with self.assertRaises(ConfigurationError):
            Dynamics("dipole", PhysParams(), self.cache, offset=OffsetSpec())
        with self.assertRaises(ConfigurationError):
            Dynamics("vortex", PhysParams(), self.cache, oec=True)

    def test_context_follows_cache(self):
        self.assertIs(Dynamics("vortex", PhysParams(), self.cache).ctx, self.ctx)

    def test_cfl_numbers(self):
        state = make_state(flat_curve(self.N, self.L), np.zeros(self.N))
        dt_z = np.linspace(0.0, 1.0, self.N)
        de = self.L / self.N
        self.assertAlmostEqual(cfl_number(state, dt_z, 0.1), 0.0)
        self.assertAlmostEqual(cfl_max_number(state, dt_z, 0.1), 0.1 / de)


class TestVerletStep(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.L = 2 * np.pi
        cls.N = 32
        cls.ctx = KernelContext(cls.L)
        cls.bottom = flat_curve(cls.N, cls.L, height=-1.0)
        cls.dynamics = Dynamics("vortex", PhysParams(), build_operator_cache(cls.ctx, cls.bottom, "vortex"))
        cls.rest = make_state(flat_curve(cls.N, cls.L), np.zeros(cls.N), bottom=cls.bottom)

    def test_rest_state_stays_at_rest(self):
        state, report = verlet_step(self.rest, self.dynamics, StepConfig(dt=0.1))
        np.testing.assert_allclose(state.surface.points, self.rest.surface.points, atol=1e-14)
        np.testing.assert_allclose(state.density, np.zeros(self.N), atol=1e-14)
        self.assertAlmostEqual(state.time, 0.1)
        self.assertEqual(report.density_iterations, 1)
        self.assertAlmostEqual(report.cfl_max, 0.0)

    def test_nonpositive_step(self):
        with self.assertRaises(ConfigurationError):
            verlet_step(self.rest, self.dynamics, StepConfig(), dt=0.0)
        with self.assertRaises(ConfigurationError):
            verlet_step(self.rest, self.dynamics, StepConfig())

    def test_bootstrap_sets_lag(self):
        state = bootstrap(self.rest, self.dynamics, 0.1)
        np.testing.assert_allclose(state.density_lag, np.zeros(self.N), atol=1e-14)

    def test_rest_fallback_step(self):
        """At rest the step is cfl * spacing / sqrt(g L)."""
        dt = choose_dt(self.rest, self.dynamics, 0.1)
        self.assertAlmostEqual(dt, 0.1 * (self.L / self.N) / np.sqrt(self.L))

    def test_degeneration(self):
        with self.assertRaises(GeometryDegenerationError):
            verlet_step(self.rest, self.dynamics, StepConfig(dt=0.1), min_speed0=1e6)


class TestLinearWaveSteps(unittest.TestCase):

    def test_wave_moves_and_keeps_its_mass(self):
        """A few steps of a small progressive wave converge every half-step and keep the fluid area."""
        for formulation in ("vortex", "dipole"):
            with self.subTest(formulation=formulation):
                cfg = RunConfig(scenario={"A": 1e-2, "n_surface": 32, "formulation": formulation})
                state, dynamics = initial_state(cfg)
                mass0 = mass(state, cfg.physics)
                for _ in range(5):
                    state, report = verlet_step(state, dynamics, cfg.step, dt=0.05)
                self.assertAlmostEqual(state.time, 0.25)
                self.assertGreater(report.cfl_max, 0.0)
                self.assertLess(report.density_iterations, 50)
                self.assertAlmostEqual(mass(state, cfg.physics) / mass0, 1.0, delta=1e-6)
                self.assertFalse(np.allclose(state.surface.points.imag, 1e-2 * np.cos(state.surface.points.real)))

    def test_second_order_in_time(self):
        """Halving dt shrinks the change of the final surface about fourfold."""
        cfg = RunConfig(scenario={"A": 5e-2, "n_surface": 32, "formulation": "vortex"})
        finals = []
        for dt in (0.1, 0.05, 0.025):
            state, dynamics = initial_state(cfg)
            for _ in range(int(round(0.4 / dt))):
                state, _ = verlet_step(state, dynamics, cfg.step, dt=dt)
            finals.append(state.surface.points)
        coarse = np.max(np.abs(finals[0] - finals[1]))
        fine = np.max(np.abs(finals[1] - finals[2]))
        self.assertGreater(coarse / fine, 3.0)
        self.assertLess(coarse / fine, 5.5)

    def test_fixed_point_budget(self):
        cfg = RunConfig(scenario={"A": 5e-2, "n_surface": 32, "formulation": "vortex"},
                        step={"fixed_point_max_iters": 1, "fixed_point_tol": 1e-15, "fixed_point_floor": 1e-15})
        state, dynamics = initial_state(cfg)
        with self.assertRaises(FixedPointError):
            verlet_step(state, dynamics, cfg.step, dt=0.05)


class _JitteringDynamics:
    """Density rate 1 +- eps, flipping sign on every evaluation; the surface does not move."""

    def __init__(self, eps: float):
        self.eps = eps
        self.calls = 0

    def refresh(self, state):
        return state

    def rates(self, state, with_density: bool = True):
        n = state.surface.n_points
        still = np.zeros(n, dtype=complex)
        if not with_density:
            return still, np.zeros(0, dtype=complex), None
        self.calls += 1
        return still, np.zeros(0, dtype=complex), np.full(n, 1.0 + self.eps * (-1) ** self.calls)


class TestRelaxationStopping(unittest.TestCase):

    def setUp(self):
        self.N = 16
        self.state = make_state(flat_curve(self.N, 2 * np.pi), np.zeros(self.N))

    def test_round_off_stall_is_accepted(self):
        """An increment that stops shrinking below the floor ends the relaxation instead of failing it."""
        state, report = verlet_step(self.state, _JitteringDynamics(1e-10), StepConfig(dt=0.1))
        self.assertEqual(report.density_iterations, 2)
        self.assertAlmostEqual(report.residual, 2e-11, delta=1e-15)
        np.testing.assert_allclose(state.density_lag, np.full(self.N, 0.05), atol=1e-10)

    def test_stall_above_floor_fails(self):
        with self.assertRaises(FixedPointError) as caught:
            verlet_step(self.state, _JitteringDynamics(1e-3), StepConfig(dt=0.1, fixed_point_max_iters=5))
        self.assertAlmostEqual(caught.exception.residual, 2e-4, delta=1e-12)

    def test_floor_is_configurable(self):
        """With the floor under the stalled increment the same relaxation is an instability."""
        with self.assertRaises(FixedPointError):
            verlet_step(self.state, _JitteringDynamics(1e-10),
                        StepConfig(dt=0.1, fixed_point_max_iters=5, fixed_point_floor=1e-12))


if __name__ == '__main__':
    unittest.main()
