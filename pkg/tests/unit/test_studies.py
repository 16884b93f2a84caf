import unittest
import os
import sys
import math

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from core.config import RunConfig
from core.studies import (STABILITY_METHODS, STABILITY_REFERENCE, STABILITY_RESOLUTIONS, _with, at_resolution,
                          breaking_config, fit_order, ic_check)


class TestHelpers(unittest.TestCase):

    def test_fit_order(self):
        n = np.array([64, 128, 256, 512])
        self.assertAlmostEqual(fit_order(n, 3.0 * n**-2.0), 2.0)
        self.assertTrue(math.isnan(fit_order(n, [1e-3, np.nan, 0.0, np.nan])))

    def test_fit_order_skips_missing_rows(self):
        n = [64, 128, 256]
        self.assertAlmostEqual(fit_order(n, [1.0 / 64, float("nan"), 1.0 / 256]), 1.0)

    def test_with_overrides_nested_fields(self):
        cfg = _with(RunConfig(), **{"scenario.A": 0.2, "end_time": 3.0})
        self.assertEqual(cfg.scenario.A, 0.2)
        self.assertEqual(cfg.end_time, 3.0)
        with self.assertRaises(ValueError):
            _with(RunConfig(), **{"scenario.n_surface": 2})

    def test_at_resolution(self):
        cfg = at_resolution(RunConfig(name="wave", scenario={"n_bottom": 64}), 128)
        self.assertEqual(cfg.name, "wave_N128")
        self.assertEqual(cfg.scenario.n_surface, 128)
        self.assertEqual(cfg.scenario.bottom_points, 128)


class TestBreakingTable(unittest.TestCase):

    def test_reference_layout(self):
        self.assertEqual(STABILITY_REFERENCE.shape, (len(STABILITY_RESOLUTIONS), len(STABILITY_METHODS)))
        self.assertEqual(STABILITY_REFERENCE.loc[2048, "oec_dipole"], 3.60)
        self.assertEqual(list(STABILITY_REFERENCE.columns), list(STABILITY_METHODS))

    def test_methods_map_onto_configs(self):
        filtered = breaking_config(256, "filtered_vortex")
        self.assertEqual(filtered.scenario.formulation, "vortex")
        self.assertEqual(filtered.regularizer, "filter")
        oec = breaking_config(256, "oec_dipole")
        self.assertEqual(oec.scenario.formulation, "dipole")
        self.assertTrue(oec.step.oec_enabled)
        plain = breaking_config(512, "vortex")
        self.assertEqual((plain.scenario.A, plain.scenario.n_surface, plain.name), (0.5, 512, "breaking_vortex_N512"))

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            breaking_config(256, "spectral")


class TestInitialConditionCheck(unittest.TestCase):

    def test_linear_wave_round_trip(self):
        """The solved densities give back the prescribed normal velocity."""
        for formulation in ("vortex", "dipole"):
            with self.subTest(formulation=formulation):
                cfg = RunConfig(scenario={"n_surface": 128, "formulation": formulation})
                row = ic_check(cfg)
                self.assertEqual(row["N"], 128)
                self.assertLess(row["relative_error"], 5e-2)


if __name__ == '__main__':
    unittest.main()
