"""Batches of runs: resolution convergence, the breaking-wave stability table and IC round trips."""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from core.artifacts import load_run
from core.config import RunConfig, ScenarioSpec, env_output_dir, env_workers
from core.diagnostics import hausdorff
from core.dipole_dynamics import dipole_workspace
from core.errors import WaveSheetError
from core.geometry import normal_component
from core.runner import RunArtifacts, run
from core.scenarios import initial_state, scenario_ic
from core.vortex_dynamics import vortex_workspace

logger = logging.getLogger(__name__)

STABILITY_RESOLUTIONS = (256, 512, 1024, 2048)
STABILITY_METHODS = ("vortex", "dipole", "oec_dipole", "filtered_vortex")
# Final integration times before instability, breaking wave A = 1/2.
STABILITY_REFERENCE = pd.DataFrame(
    {"vortex": [2.40, 2.03, 1.73, 1.15], "dipole": [3.02, 3.04, 3.13, 3.10],
     "oec_dipole": [3.06, 3.37, 3.39, 3.60], "filtered_vortex": [2.81, 2.80, 2.86, 2.93]},
    index=pd.Index(STABILITY_RESOLUTIONS, name="N"))


@dataclass
class ConvergenceResult:
    table: pd.DataFrame
    orders: dict

    @property
    def complete(self) -> bool:
        return bool((self.table["status"] == "ok").all())


def _with(cfg: RunConfig, **changes) -> RunConfig:
    """Copy of a config with dotted-path overrides, re-validated."""
    data = cfg.model_dump(mode="json")
    for path, value in changes.items():
        node = data
        *parents, leaf = path.split(".")
        for key in parents:
            node = node[key]
        node[leaf] = value
    return RunConfig.model_validate(data)


def at_resolution(cfg: RunConfig, n: int, name: str | None = None) -> RunConfig:
    """The same run at N surface (and bottom) points."""
    return _with(cfg, **{"scenario.n_surface": n, "scenario.n_bottom": None,
                         "name": name or f"{cfg.name}_N{n}"})


def _run_one(cfg: RunConfig, output_dir: str) -> RunArtifacts:
    return run(cfg, output_dir=output_dir)


def run_batch(configs: list[RunConfig], output_dir: str | None = None, workers: int | None = None,
              progress: bool = True) -> dict[str, RunArtifacts]:
    """
    Runs independent configs, in worker processes when workers > 1.

    Per-run progress bars are switched off; one bar counts finished runs.

    Returns:
        dict[str, RunArtifacts]: artifacts by run name.
    """
    output_dir = output_dir or env_output_dir()
    workers = workers or env_workers()
    configs = [_with(c, progress=False) for c in configs]
    results: dict[str, RunArtifacts] = {}
    with tqdm(total=len(configs), disable=not progress, desc="runs") as bar:
        if workers == 1:
            for c in configs:
                results[c.name] = _run_one(c, output_dir)
                bar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(configs))) as pool:
                futures = {c.name: pool.submit(_run_one, c, output_dir) for c in configs}
                for name, fut in futures.items():
                    results[name] = fut.result()
                    bar.update(1)
    for name, art in results.items():
        logger.info("%s: %s at t=%.4g", name, art.termination, art.final_time)
    return results


def fit_order(resolutions, errors) -> float:
    """Minus the least-squares slope of log(error) against log(N); NaN below two usable points."""
    n = np.asarray(resolutions, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = np.isfinite(e) & (e > 0.0)
    if np.count_nonzero(ok) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(n[ok]), np.log(e[ok]), 1)
    return float(-slope)


def convergence_study(base: RunConfig, resolutions, reference_n: int, times, output_dir: str | None = None,
                      workers: int | None = None, progress: bool = True) -> ConvergenceResult:
    """
    Hausdorff error of each resolution against a reference resolution at the given times.

    Every run saves snapshots exactly at `times`. A run that stopped before a time
    leaves its rows marked 'missing' with a NaN error; the order fit skips them.

    Args:
        base (RunConfig): configuration shared by every run; its resolution is overridden.
        resolutions (Sequence[int]): the N to compare.
        reference_n (int): N of the reference solution.
        times (Sequence[float]): comparison times.
        output_dir (str, optional): parent of the run directories.
        workers (int, optional): process count; WAVESHEET_WORKERS by default.

    Returns:
        ConvergenceResult: long table (N, time, error, status) and the fitted order per time.
    """
    times = sorted(float(t) for t in times)
    base = _with(base, save_times=times, end_time=max(max(times), base.end_time))
    configs = {n: at_resolution(base, n) for n in sorted(set(resolutions) | {reference_n})}
    arts = run_batch(list(configs.values()), output_dir, workers, progress)
    data = {n: load_run(arts[c.name].directory) for n, c in configs.items()}

    rows = []
    for t in times:
        ref = data[reference_n].snapshot_at(t)
        for n in sorted(resolutions):
            snap = data[n].snapshot_at(t)
            if ref is None or snap is None:
                logger.warning("no snapshot at t=%g for N=%d or the reference; row left empty", t, n)
                rows.append({"N": n, "time": t, "error": float("nan"), "status": "missing"})
                continue
            rows.append({"N": n, "time": t, "error": hausdorff(snap.curve(), ref.curve()), "status": "ok"})
    table = pd.DataFrame(rows, columns=["N", "time", "error", "status"])
    orders = {t: fit_order(g["N"], g["error"]) for t, g in table.groupby("time")}
    for t, order in orders.items():
        logger.info("t=%g: fitted convergence order %.3f", t, order)
    return ConvergenceResult(table=table, orders=orders)


def breaking_config(n: int, method: str, end_time: float = 5.0, name: str | None = None) -> RunConfig:
    """Breaking wave A = 1/2, k = 1, L = 2 pi, h0 = 1, run until it goes unstable."""
    if method not in STABILITY_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {STABILITY_METHODS}")
    formulation = "dipole" if method in ("dipole", "oec_dipole") else "vortex"
    return RunConfig(
        name=name or f"breaking_{method}_N{n}",
        scenario=ScenarioSpec(kind="breaking", A=0.5, k=1.0, n_surface=n, formulation=formulation,
                              L=2 * np.pi, h0=1.0, g=1.0),
        step={"oec_enabled": method == "oec_dipole"},
        regularizer="filter" if method == "filtered_vortex" else "none",
        end_time=end_time, snapshot_every=50)


@dataclass
class StabilityResult:
    times: pd.DataFrame
    terminations: pd.DataFrame


def stability_study(resolutions=STABILITY_RESOLUTIONS, methods=STABILITY_METHODS, output_dir: str | None = None,
                    workers: int | None = None, end_time: float = 5.0, progress: bool = True) -> StabilityResult:
    """
    Breaking-wave runs for every resolution and method.

    Returns:
        StabilityResult: final times and termination classes, index N, one column per method.
    """
    configs = [breaking_config(n, m, end_time) for n in resolutions for m in methods]
    arts = run_batch(configs, output_dir, workers, progress)
    index = pd.Index(list(resolutions), name="N")
    times = pd.DataFrame(index=index, columns=list(methods), dtype=float)
    terminations = pd.DataFrame(index=index, columns=list(methods), dtype=object)
    for n in resolutions:
        for m in methods:
            art = arts[f"breaking_{m}_N{n}"]
            times.loc[n, m] = art.final_time
            terminations.loc[n, m] = art.termination
    return StabilityResult(times=times, terminations=terminations)


def stability_table(resolutions=STABILITY_RESOLUTIONS, methods=STABILITY_METHODS, output_dir: str | None = None,
                    workers: int | None = None, end_time: float = 5.0, progress: bool = True) -> pd.DataFrame:
    """Final time before the run stopped; a run that reached end_time shows end_time."""
    return stability_study(resolutions, methods, output_dir, workers, end_time, progress).times


def normal_trace(state, dynamics) -> np.ndarray:
    """u.n at the surface nodes rebuilt from a solved state."""
    s = state.surface
    if dynamics.formulation == "vortex":
        u = vortex_workspace(state, dynamics.params, dynamics.ctx).u_mean
    else:
        ws = dipole_workspace(state, dynamics.params, dynamics.background, dynamics.ctx)
        u = ws.u_mean + ws.u_background
    return normal_component(u, s.d1)


def ic_check(cfg: RunConfig) -> dict:
    """
    Scenario -> boundary solve -> normal-trace reconstruction for one config.

    Returns:
        dict: scenario, formulation, N and the max and relative reconstruction errors.
    """
    surface, g_normal = scenario_ic(cfg.scenario)
    state, dynamics = initial_state(cfg, surface, g_normal)
    state = dynamics.refresh(state)
    err = float(np.max(np.abs(normal_trace(state, dynamics) - g_normal)))
    scale = float(np.max(np.abs(g_normal))) or 1.0
    return {"scenario": cfg.scenario.kind, "formulation": cfg.scenario.formulation,
            "N": cfg.scenario.n_surface, "max_error": err, "relative_error": err / scale}


def ic_check_all(n: int = 256, formulations=("vortex", "dipole"), kinds=("linear_wave", "stokes2", "cnoidal",
                                                                         "breaking")) -> pd.DataFrame:
    """ic_check over every built-in scenario, with their reference parameters."""
    presets = {"linear_wave": {"A": 1e-3}, "stokes2": {"A": 1e-2}, "breaking": {"A": 0.5},
               "cnoidal": {"A": 0.1, "L": 40 * np.pi}}
    rows = []
    for kind in kinds:
        for formulation in formulations:
            preset = dict(presets[kind])
            L = preset.pop("L", 2 * np.pi)
            cfg = RunConfig(scenario={"kind": kind, "n_surface": n, "formulation": formulation, **preset},
                            physics={"L": L})
            try:
                rows.append(ic_check(cfg))
            except WaveSheetError as e:
                logger.warning("ic-check %s/%s failed: %s", kind, formulation, e)
                rows.append({"scenario": kind, "formulation": formulation, "N": n,
                             "max_error": float("nan"), "relative_error": float("nan")})
    return pd.DataFrame(rows)


if __name__ == '__main__':
    print(ic_check_all(n=64).to_string(index=False))
    print(STABILITY_REFERENCE)
    print("workers:", env_workers(), "output:", os.path.abspath(env_output_dir()))
