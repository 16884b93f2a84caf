import unittest
import os
import sys
import shutil
import tempfile

import numpy as np
from click.testing import CliRunner

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../')))
from app.cli import cli
from app.ui_components import drift_frame, interface_frame
from core.artifacts import list_runs, load_bottom, load_run
from core.config import RunConfig, dump_run_config
from core.runner import EXIT_CODES, run
from core.studies import STABILITY_METHODS, convergence_study, stability_study, stability_table


class TestFullPipeline(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        """Run a short linear wave in each formulation into a scratch directory."""
        cls.test_dir = tempfile.mkdtemp(prefix="wavesheet_it_")
        cls.artifacts = {}
        for formulation in ("vortex", "dipole"):
            cfg = RunConfig(name=f"linear_{formulation}",
                            scenario={"A": 1e-2, "n_surface": 32, "formulation": formulation},
                            end_time=0.2, step={"dt": 0.05}, save_times=[0.1], progress=False)
            cls.artifacts[formulation] = run(cfg, output_dir=cls.test_dir)

    @classmethod
    def tearDownClass(cls):
        """Clean up the run directories."""
        if os.path.exists(cls.test_dir):
            shutil.rmtree(cls.test_dir)

    def test_runs_complete(self):
        for formulation, art in self.artifacts.items():
            with self.subTest(formulation=formulation):
                self.assertEqual(art.exit_code, EXIT_CODES["completed"])
                self.assertAlmostEqual(art.final_time, 0.2)
                self.assertEqual(art.steps, 4)
                self.assertLess(art.drift["mass"], 1e-6)

    def test_run_directory_reloads(self):
        """Everything the browser needs comes back from disk."""
        for formulation, art in self.artifacts.items():
            with self.subTest(formulation=formulation):
                data = load_run(art.directory)
                self.assertEqual(data.metadata["config"]["scenario"]["formulation"], formulation)
                self.assertEqual(len(data.timeseries), art.steps + 1)
                self.assertEqual([s.time for s in data.snapshots][0], 0.0)
                self.assertIsNotNone(data.snapshot_at(0.1))
                final = data.snapshot_at(0.2)
                self.assertIsNotNone(final)
                self.assertEqual(final.mode, formulation)
                self.assertEqual(final.points.size, 32)
                self.assertTrue(np.all(np.isfinite(final.density)))
        self.assertEqual(sorted(list_runs(self.test_dir)), sorted(a.directory for a in self.artifacts.values()))

    def test_browser_frames(self):
        data = load_run(self.artifacts["dipole"].directory)
        drift = drift_frame(data.timeseries)
        self.assertEqual(set(drift["quantity"]), {"mass", "energy"})
        self.assertEqual(len(drift), 2 * len(data.timeseries))
        self.assertAlmostEqual(float(drift["relative drift"].iloc[0]), 0.0)
        final = data.snapshots[-1]
        bottom = load_bottom(data.directory)
        frame = interface_frame(final.points, bottom)
        self.assertEqual(len(frame), final.points.size + bottom.size)
        self.assertEqual(set(frame["curve"]), {"surface", "bottom"})

    def test_convergence_study(self):
        base = RunConfig(name="conv", scenario={"A": 1e-2, "formulation": "vortex"}, end_time=0.2,
                         step={"dt": 0.05}, progress=False)
        study_dir = os.path.join(self.test_dir, "study")
        result = convergence_study(base, [32, 64], 128, [0.2], output_dir=study_dir, workers=1,
                                   progress=False)
        self.assertTrue(result.complete)
        self.assertEqual(list(result.table["N"]), [32, 64])
        self.assertTrue(np.all(np.isfinite(result.table["error"])))
        self.assertIn(0.2, result.orders)
        errors = list(result.table["error"])
        self.assertGreater(errors[0], errors[1])
        self.assertGreater(result.orders[0.2], 1.0)


class TestStabilityStudy(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        """Every breaking-wave method at a coarse resolution, stopped early."""
        cls.test_dir = tempfile.mkdtemp(prefix="wavesheet_stab_")
        cls.end_time = 0.1
        cls.result = stability_study([32], output_dir=cls.test_dir, workers=1, end_time=cls.end_time,
                                     progress=False)

    @classmethod
    def tearDownClass(cls):
        if os.path.exists(cls.test_dir):
            shutil.rmtree(cls.test_dir)

    def test_tables_share_their_layout(self):
        for frame in (self.result.times, self.result.terminations):
            self.assertEqual(list(frame.index), [32])
            self.assertEqual(list(frame.columns), list(STABILITY_METHODS))

    def test_termination_classes(self):
        """Each run stops for a known reason, and only completed runs reach the end time."""
        for method in STABILITY_METHODS:
            with self.subTest(method=method):
                termination = self.result.terminations.loc[32, method]
                final_time = self.result.times.loc[32, method]
                self.assertIn(termination, ("completed", "instability", "splash"))
                self.assertLessEqual(final_time, self.end_time + 1e-9)
                if termination == "completed":
                    self.assertAlmostEqual(final_time, self.end_time)
                data = load_run(os.path.join(self.test_dir, f"breaking_{method}_N32"))
                self.assertEqual(data.metadata["run"]["termination"], termination)

    def test_table_matches_study(self):
        table = stability_table([32], methods=("vortex",), output_dir=os.path.join(self.test_dir, "again"),
                                workers=1, end_time=self.end_time, progress=False)
        self.assertEqual(table.loc[32, "vortex"], self.result.times.loc[32, "vortex"])


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.runner = CliRunner()

    def tearDown(self):
        self.tmp.cleanup()

    def test_run_command(self):
        result = self.runner.invoke(cli, ["run", "-n", "32", "--dt", "0.05", "--end-time", "0.1",
                                          "--output-dir", self.tmp.name, "--name", "cli_run"])
        self.assertEqual(result.exit_code, EXIT_CODES["completed"], result.output)
        data = load_run(os.path.join(self.tmp.name, "cli_run"))
        self.assertEqual(data.metadata["run"]["termination"], "completed")

    def test_run_from_config_file(self):
        """Flags override the file; the rest comes from the file."""
        path = os.path.join(self.tmp.name, "wave.toml")
        cfg = RunConfig(name="from_file", scenario={"n_surface": 16, "formulation": "vortex"}, end_time=0.1,
                        step={"dt": 0.05})
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dump_run_config(cfg))
        result = self.runner.invoke(cli, ["run", "--config", path, "-n", "32", "--output-dir", self.tmp.name])
        self.assertEqual(result.exit_code, EXIT_CODES["completed"], result.output)
        data = load_run(os.path.join(self.tmp.name, "from_file"))
        self.assertEqual(data.metadata["config"]["scenario"]["n_surface"], 32)
        self.assertEqual(data.metadata["config"]["scenario"]["formulation"], "vortex")

    def test_table1_names_the_stability_command(self):
        self.assertIs(cli.get_command(None, "table1"), cli.get_command(None, "stability"))
        result = self.runner.invoke(cli, ["table1", "--help"])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("--resolutions", result.output)

    def test_bad_config_file(self):
        path = os.path.join(self.tmp.name, "bad.toml")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("name = [unclosed")
        result = self.runner.invoke(cli, ["run", "--config", path, "--output-dir", self.tmp.name])
        self.assertEqual(result.exit_code, EXIT_CODES["error"])


if __name__ == '__main__':
    unittest.main()
