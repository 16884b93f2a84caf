import unittest
import os
import sys
import math
import tempfile
from unittest.mock import patch

import toml

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.config import (PhysParams, RunConfig, ScenarioSpec, dump_run_config, env_log_level, env_output_dir,
                         env_workers, load_run_config, parse_run_config)
from core.errors import ConfigurationError


class TestPhysParams(unittest.TestCase):

    def test_defaults(self):
        p = PhysParams()
        self.assertEqual((p.g, p.rho_F, p.rho_A, p.alpha), (1.0, 1.0, 0.0, 1.0))
        self.assertAlmostEqual(p.L, 2 * math.pi)
        self.assertEqual(p.A_tw, 1.0)
        self.assertTrue(p.single_fluid)

    def test_atwood_number(self):
        p = PhysParams(rho_A=1.0 / 3.0)
        self.assertAlmostEqual(p.A_tw, 0.5)
        self.assertFalse(p.single_fluid)

    def test_rejects_bad_values(self):
        with self.assertRaises(ValueError):
            PhysParams(g=0.0)
        with self.assertRaises(ValueError):
            PhysParams(alpha=1.5)
        with self.assertRaises(ValueError):
            PhysParams(gravity=1.0)


class TestRunConfig(unittest.TestCase):

    def test_scenario_inherits_geometry(self):
        cfg = RunConfig(physics={"L": 4 * math.pi, "h0": 2.0})
        self.assertAlmostEqual(cfg.scenario.L, 4 * math.pi)
        self.assertEqual(cfg.scenario.h0, 2.0)
        self.assertEqual(cfg.scenario.g, 1.0)

    def test_disagreeing_geometry(self):
        with self.assertRaises(ValueError):
            RunConfig(scenario={"L": 3.0}, physics={"L": 4.0})

    def test_wavenumber_must_fit_the_period(self):
        with self.assertRaises(ValueError):
            ScenarioSpec(k=1.5, L=2 * math.pi)
        ScenarioSpec(k=2.0, L=2 * math.pi)

    def test_formulation_specific_options(self):
        with self.assertRaises(ValueError):
            RunConfig(scenario={"formulation": "vortex"}, step={"oec_enabled": True})
        with self.assertRaises(ValueError):
            RunConfig(scenario={"formulation": "dipole"}, regularizer="offset")
        with self.assertRaises(ValueError):
            RunConfig(scenario={"formulation": "vortex"}, background="uniform_gamma_flat")
        with self.assertRaises(ValueError):
            RunConfig(scenario={"formulation": "vortex", "n_surface": 65}, regularizer="filter")

    def test_two_fluid_dipole_limits(self):
        with self.assertRaises(ValueError):
            RunConfig(physics={"rho_A": 0.1, "gamma": 1.0})
        with self.assertRaises(ValueError):
            RunConfig(physics={"rho_A": 0.1}, background="uniform_gamma_flat")
        RunConfig(physics={"rho_A": 0.1})

    def test_depth_requirements(self):
        with self.assertRaises(ValueError):
            RunConfig(scenario={"deep_water": True, "formulation": "vortex"}, physics={"omega0": 0.5})
        with self.assertRaises(ValueError):
            RunConfig(scenario={"kind": "cnoidal", "deep_water": True})
        with self.assertRaises(ValueError):
            RunConfig(scenario={"deep_water": True}, background="harmonic_H")

    def test_dipole_vorticity_needs_mirror(self):
        with self.assertRaises(ValueError):
            RunConfig(physics={"omega0": 0.5})
        RunConfig(physics={"omega0": 0.5}, background="mirror_flat_bottom")

    def test_save_times(self):
        with self.assertRaises(ValueError):
            RunConfig(end_time=1.0, save_times=[0.5, 1.5])
        self.assertEqual(RunConfig(end_time=1.0, save_times=[0.5, 1.0]).save_times, [0.5, 1.0])


class TestConfigFiles(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text: str) -> str:
        path = os.path.join(self.tmp.name, "run.toml")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return path

    def test_dump_and_load(self):
        cfg = RunConfig(name="breaking", scenario={"kind": "breaking", "A": 0.5, "n_surface": 128},
                        end_time=3.0, save_times=[1.0, 2.0])
        self.assertEqual(load_run_config(self._write(dump_run_config(cfg))), cfg)

    def test_parse_wraps_validation_errors(self):
        with self.assertRaises(ConfigurationError):
            parse_run_config({"scenario": {"kind": "tsunami"}})

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_run_config(os.path.join(self.tmp.name, "absent.toml"))

    def test_invalid_toml(self):
        with self.assertRaises(ConfigurationError):
            load_run_config(self._write("name = [unclosed"))

    def test_minimal_document(self):
        cfg = load_run_config(self._write(toml.dumps({"name": "tiny", "scenario": {"n_surface": 32}})))
        self.assertEqual(cfg.scenario.n_surface, 32)
        self.assertEqual(cfg.scenario.formulation, "dipole")


class TestEnvironment(unittest.TestCase):

    def test_defaults(self):
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(env_output_dir(), "runs")
            self.assertEqual(env_log_level(), "INFO")
            self.assertGreaterEqual(env_workers(), 1)

    def test_overrides(self):
        env = {"WAVESHEET_OUTPUT_DIR": "/tmp/out", "WAVESHEET_LOG_LEVEL": "debug", "WAVESHEET_WORKERS": "3"}
        with patch.dict(os.environ, env):
            self.assertEqual(env_output_dir(), "/tmp/out")
            self.assertEqual(env_log_level(), "DEBUG")
            self.assertEqual(env_workers(), 3)

    def test_bad_worker_count(self):
        with patch.dict(os.environ, {"WAVESHEET_WORKERS": "many"}):
            self.assertGreaterEqual(env_workers(), 1)
        with patch.dict(os.environ, {"WAVESHEET_WORKERS": "0"}):
            self.assertEqual(env_workers(), 1)


if __name__ == '__main__':
    unittest.main()
