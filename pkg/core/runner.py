"""Run orchestration: initial solve, the Verlet loop, termination checks and persistence."""
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from tqdm import tqdm

from core.artifacts import RunWriter, load_timeseries
from core.config import InstabilityThresholds, RunConfig, env_output_dir
from core.diagnostics import record, relative_drift
from core.errors import (DegenerateCurveError, FixedPointError, GeometryDegenerationError, NeumannDivergenceError,
                         WaveSheetError)
from core.geometry import Curve, min_spacing
from core.kernels import sheet_densities
from core.scenarios import initial_state
from core.stepper import choose_dt, verlet_step

logger = logging.getLogger(__name__)

EXIT_CODES = {"completed": 0, "instability": 2, "splash": 3, "error": 1}


@dataclass
class RunArtifacts:
    directory: str
    termination: str
    message: str
    final_time: float
    steps: int
    dt: float
    timeseries: pd.DataFrame = field(default_factory=pd.DataFrame)
    drift: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.termination]


@dataclass(frozen=True)
class InstabilityBaseline:
    """Reference scales of the first state, against which blow-up is measured."""
    min_spacing: float
    max_density: float

    @classmethod
    def from_state(cls, state) -> "InstabilityBaseline":
        gamma, _ = sheet_densities(state)
        return cls(min_spacing=min_spacing(state.surface), max_density=float(np.max(np.abs(gamma))))


def instability_reason(history, thresholds: InstabilityThresholds, baseline: InstabilityBaseline | None = None,
                       fixed_point_failed: bool = False) -> str | None:
    """
    Why the latest state of a run counts as numerically unstable, or None.

    Args:
        history (Sequence[SheetState]): recent states, oldest first; history[0] is the
            baseline when none is given.
        thresholds (InstabilityThresholds): spacing and growth limits.
        baseline (InstabilityBaseline, optional): scales of the initial state.
        fixed_point_failed (bool): whether the step producing the latest state failed to settle.

    Returns:
        str | None: a short reason.
    """
    if fixed_point_failed:
        return "fixed-point relaxation failed"
    latest = history[-1]
    if baseline is None:
        baseline = InstabilityBaseline.from_state(history[0])
    s = latest.surface
    if not (np.all(np.isfinite(s.points)) and np.all(np.isfinite(latest.density))):
        return "non-finite values"
    spacing = min_spacing(s)
    if spacing < thresholds.spacing_ratio * baseline.min_spacing:
        return f"node spacing {spacing:.3e} below {thresholds.spacing_ratio:g} of its initial minimum"
    gamma, _ = sheet_densities(latest)
    peak = float(np.max(np.abs(gamma)))
    if baseline.max_density > 0.0 and peak > thresholds.density_growth * baseline.max_density:
        return f"sheet density {peak:.3e} grew past {thresholds.density_growth:g} times its initial maximum"
    return None


def detect_instability(history, thresholds: InstabilityThresholds | None = None,
                       baseline: InstabilityBaseline | None = None, fixed_point_failed: bool = False) -> bool:
    return instability_reason(history, thresholds or InstabilityThresholds(), baseline, fixed_point_failed) is not None


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def detect_splash(surface: Curve) -> bool:
    """
    Whether two non-adjacent segments of the surface polyline cross.

    Segment i joins node i to node i+1, the last one closing onto node 0 shifted
    by L. Candidate pairs come from a KD-tree on segment midpoints (with the
    +-L images), then each pair gets an exact orientation test.
    """
    L = surface.horizontal_period
    z = surface.points
    n = z.size
    start = z
    end = np.concatenate([z[1:], z[:1] + L])
    mids = 0.5 * (start + end)
    reach = float(np.max(np.abs(end - start)))
    images = np.concatenate([mids - L, mids, mids + L])
    own = cKDTree(np.column_stack([mids.real, mids.imag]))
    shifted = cKDTree(np.column_stack([images.real, images.imag]))
    hits = own.query_ball_tree(shifted, r=reach * (1.0 + 1e-12))

    rows, cols = [], []
    for i, found in enumerate(hits):
        for m in found:
            rows.append(i)
            cols.append(m)
    if not rows:
        return False
    i = np.asarray(rows)
    m = np.asarray(cols)
    j = m % n
    shift = m // n - 1
    same_period = shift == 0
    gap = (j - i) % n
    adjacent = same_period & ((gap == 0) | (gap == 1) | (gap == n - 1))
    adjacent |= (shift == 1) & (i == n - 1) & (j == 0)
    adjacent |= (shift == -1) & (i == 0) & (j == n - 1)
    keep = ~adjacent
    i, j, shift = i[keep], j[keep], shift[keep]
    if i.size == 0:
        return False

    p1, p2 = start[i], end[i]
    q1, q2 = start[j] + shift * L, end[j] + shift * L
    d1 = _cross(p2 - p1, q1 - p1)
    d2 = _cross(p2 - p1, q2 - p1)
    d3 = _cross(q2 - q1, p1 - q1)
    d4 = _cross(q2 - q1, p2 - q1)
    return bool(np.any((d1 * d2 < 0.0) & (d3 * d4 < 0.0)))


def _step_targets(cfg: RunConfig) -> list[float]:
    return sorted(set(cfg.save_times) | {cfg.end_time})


def run(cfg: RunConfig, surface: Curve | None = None, g_normal=None, output_dir: str | None = None) -> RunArtifacts:
    """
    Runs one simulation and writes its directory.

    Steps at a fixed dt (from the config, or chosen from cfg.step.cfl_target) and
    shortens the step that lands on each save time and on the end time; the
    staggered density is re-bootstrapped after a shortened step. Failures raised
    inside the step loop end the run with a recorded reason and a final snapshot.

    Args:
        cfg (RunConfig): validated configuration.
        surface (Curve, optional): custom initial surface.
        g_normal (np.ndarray, optional): its normal velocity.
        output_dir (str, optional): parent directory; defaults to cfg.output_dir or WAVESHEET_OUTPUT_DIR.

    Returns:
        RunArtifacts: termination reason, final time, time series and drift summary.

    Raises:
        ConfigurationError: if the initial state cannot be built from the config.
    """
    root = output_dir or cfg.output_dir or env_output_dir()
    directory = os.path.join(root, cfg.name)
    state, dynamics = initial_state(cfg, surface, g_normal)
    params, background = cfg.physics, dynamics.background
    writer = RunWriter(directory, cfg)
    if state.bottom is not None:
        writer.write_bottom(state.bottom)
    if params.omega0 != 0.0:
        logger.warning("omega0=%g: the energy diagnostic leaves out the uniform-vorticity area integral",
                       params.omega0)

    dt = cfg.step.dt if cfg.step.dt is not None else choose_dt(state, dynamics, cfg.step.cfl_target)
    filter_spec = cfg.filter if cfg.regularizer == "filter" else None
    min_speed0 = float(np.min(state.surface.speed))
    thresholds = cfg.thresholds
    baseline = InstabilityBaseline.from_state(state)
    history = deque([dynamics.refresh(state)], maxlen=2)

    writer.append(record(history[-1], params, background))
    writer.write_snapshot(history[-1])
    targets = _step_targets(cfg)
    save_times = set(cfg.save_times)
    total = sum(math.ceil(t / dt - 1e-9) for t in np.diff([0.0] + targets))
    logger.info("run '%s': %s %s, N=%d, dt=%.4e, end time %g", cfg.name, cfg.scenario.kind,
                cfg.scenario.formulation, state.surface.n_points, dt, cfg.end_time)

    termination, message, steps = "completed", "", 0
    state = history[-1]
    with tqdm(total=total, disable=not cfg.progress, desc=cfg.name) as bar:
        for target in targets:
            while termination == "completed" and state.time < target - 1e-12 * max(1.0, target):
                step_dt = min(dt, target - state.time)
                shortened = step_dt < dt * (1.0 - 1e-9)
                if shortened:
                    state = state.evolve(density_lag=None)
                try:
                    new_state, report = verlet_step(state, dynamics, cfg.step, step_dt, filter_spec, min_speed0,
                                                    thresholds.degeneration_ratio)
                except (FixedPointError, NeumannDivergenceError) as e:
                    termination, message = "instability", str(e)
                    break
                except (GeometryDegenerationError, DegenerateCurveError) as e:
                    termination, message = "instability", str(e)
                    break
                except WaveSheetError as e:
                    termination, message = "error", f"{type(e).__name__}: {e}"
                    break
                if shortened:
                    new_state = new_state.evolve(density_lag=None)
                state = new_state
                steps += 1
                bar.update(1)
                history.append(state)

                reason = instability_reason(history, thresholds, baseline)
                if reason == "non-finite values" or (reason and cfg.stop_on_instability):
                    termination, message = "instability", reason
                    break
                writer.append(record(state, params, background, report.cfl, report.cfl_max,
                                     report.density_iterations + report.position_iterations))
                if steps % cfg.snapshot_every == 0:
                    writer.write_snapshot(state)
                if cfg.stop_on_splash and detect_splash(state.surface):
                    termination, message = "splash", "the surface crossed itself"
                    break
            if termination != "completed":
                break
            if target in save_times:
                writer.write_snapshot(state)

    writer.write_snapshot(state)
    timeseries = load_timeseries(directory)
    drift = {"mass": relative_drift(timeseries["mass"]), "energy": relative_drift(timeseries["energy"])}
    writer.write_metadata(termination, message, state.time, steps, dt, drift)
    if termination == "completed":
        logger.info("run '%s' completed at t=%.6g after %d steps", cfg.name, state.time, steps)
    else:
        logger.info("run '%s' stopped (%s) at t=%.6g: %s", cfg.name, termination, state.time, message)
    logger.info("relative drift: mass %.3e, energy %.3e", drift["mass"], drift["energy"])
    return RunArtifacts(directory=directory, termination=termination, message=message, final_time=state.time,
                        steps=steps, dt=dt, timeseries=timeseries, drift=drift)


if __name__ == '__main__':
    import tempfile
    cfg = RunConfig(name="demo", scenario={"kind": "linear_wave", "n_surface": 32}, end_time=1.0,
                    step={"dt": 0.1}, progress=False)
    with tempfile.TemporaryDirectory() as tmp:
        out = run(cfg, output_dir=tmp)
        print(out.termination, out.final_time, out.drift)
