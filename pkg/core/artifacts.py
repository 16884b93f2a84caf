"""Run directories: writing the time series, snapshots and metadata, and loading them back."""
import logging
import math
import os
import platform
from dataclasses import dataclass, field
from importlib import metadata as importlib_metadata

import numpy as np
import pandas as pd
import toml

from core.config import RunConfig
from core.diagnostics import TIMESERIES_COLUMNS, DiagnosticsRecord
from core.geometry import Curve, build_curve

logger = logging.getLogger(__name__)

TIMESERIES_FILE = "timeseries.txt"
METADATA_FILE = "metadata.toml"
BOTTOM_FILE = "bottom.txt"
SNAPSHOT_DIR = "snapshots"
SNAPSHOT_FMT = "%.17g"
VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "toml")


@dataclass
class Snapshot:
    """One saved interface: node positions, the density and the point vortices at `time`."""
    time: float
    points: np.ndarray
    density: np.ndarray
    horizontal_period: float
    param_length: float
    e0: float = 0.0
    mode: str = "vortex"
    vortex_z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    vortex_strength: np.ndarray = field(default_factory=lambda: np.zeros(0))
    path: str | None = None

    def curve(self) -> Curve:
        return build_curve(self.points, self.horizontal_period, self.param_length, self.e0)


@dataclass
class RunData:
    timeseries: pd.DataFrame
    snapshots: list[Snapshot]
    metadata: dict
    directory: str

    def snapshot_at(self, t: float, tol: float = 1e-9) -> Snapshot | None:
        """Saved snapshot whose time matches t, or None."""
        for snap in self.snapshots:
            if abs(snap.time - t) <= tol * max(1.0, abs(t)):
                return snap
        return None


def package_versions() -> dict:
    versions = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = importlib_metadata.version(name)
        except importlib_metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _toml_safe(value):
    """Non-finite floats are written as strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _toml_safe(v) for k, v in value.items()}
    return value


class RunWriter:
    """
    Owns one run directory and appends to it as the run progresses.

    The time series is flushed after every row so an interrupted run still leaves
    readable output.
    """

    def __init__(self, directory: str, cfg: RunConfig):
        self.directory = directory
        self.cfg = cfg
        self.snapshot_dir = os.path.join(directory, SNAPSHOT_DIR)
        os.makedirs(self.snapshot_dir, exist_ok=True)
        self._n_snapshots = 0
        self._last_snapshot_time: float | None = None
        self._timeseries_path = os.path.join(directory, TIMESERIES_FILE)
        with open(self._timeseries_path, "w", encoding="utf-8") as fh:
            fh.write(" ".join(TIMESERIES_COLUMNS) + "\n")
        logger.info("writing run output to %s", directory)

    def append(self, rec: DiagnosticsRecord) -> None:
        row = rec.as_row()
        text = " ".join(str(row[c]) if c == "fixed_point_iters" else SNAPSHOT_FMT % row[c]
                        for c in TIMESERIES_COLUMNS)
        with open(self._timeseries_path, "a", encoding="utf-8") as fh:
            fh.write(text + "\n")

    def write_snapshot(self, state) -> str | None:
        """Writes the next snapshot file; a second call at the same time is a no-op."""
        if state.time == self._last_snapshot_time:
            return None
        self._last_snapshot_time = state.time
        path = os.path.join(self.snapshot_dir, f"snap_{self._n_snapshots:06d}.txt")
        self._n_snapshots += 1
        s = state.surface
        header = [f"time = {float(state.time)!r}", f"mode = {state.mode}",
                  f"horizontal_period = {s.horizontal_period!r}", f"param_length = {s.param_length!r}",
                  f"e0 = {s.e0!r}", f"n_vortices = {state.n_vortices}"]
        header += [f"vortex = {float(z.real)!r} {float(z.imag)!r} {float(g)!r}"
                   for z, g in zip(state.vortex_z, state.vortex_strength)]
        header.append("re_z im_z density")
        table = np.column_stack([s.points.real, s.points.imag, state.density])
        np.savetxt(path, table, fmt=SNAPSHOT_FMT, header="\n".join(header))
        return path

    def write_bottom(self, bottom: Curve) -> None:
        path = os.path.join(self.directory, BOTTOM_FILE)
        np.savetxt(path, np.column_stack([bottom.points.real, bottom.points.imag]), fmt=SNAPSHOT_FMT,
                   header=f"horizontal_period = {bottom.horizontal_period!r}\nre_z im_z")

    def write_metadata(self, termination: str, message: str, final_time: float, steps: int,
                       dt: float, drift: dict) -> str:
        doc = {
            "config": self.cfg.model_dump(mode="json", exclude_none=True),
            "versions": package_versions(),
            "run": _toml_safe({"termination": termination, "message": message, "final_time": float(final_time),
                               "steps": int(steps), "dt": float(dt),
                               "filter_placement": "after the position update, once per step"}),
            "drift": _toml_safe({k: float(v) for k, v in drift.items()}),
        }
        path = os.path.join(self.directory, METADATA_FILE)
        with open(path, "w", encoding="utf-8") as fh:
            toml.dump(doc, fh)
        return path


def _parse_header(lines: list[str]) -> dict:
    meta: dict = {"vortices": []}
    for line in lines:
        body = line.lstrip("#").strip()
        if " = " not in body:
            continue
        key, value = body.split(" = ", 1)
        if key == "vortex":
            x, y, g = (float(v) for v in value.split())
            meta["vortices"].append((complex(x, y), g))
        else:
            meta[key] = value
    return meta


def load_snapshot(path: str) -> Snapshot:
    """
    Reads one snapshot file.

    Raises:
        FileNotFoundError: if the file is missing.
        ValueError: if the header lacks the time or the curve periods.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Snapshot not found at: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        header = [line for line in fh if line.startswith("#")]
    meta = _parse_header(header)
    try:
        time = float(meta["time"])
        L = float(meta["horizontal_period"])
        param_length = float(meta["param_length"])
    except KeyError as e:
        raise ValueError(f"snapshot {path} has no '{e.args[0]}' header entry") from e
    table = np.loadtxt(path, ndmin=2)
    vortices = meta["vortices"]
    return Snapshot(time=time, points=table[:, 0] + 1j * table[:, 1], density=table[:, 2],
                    horizontal_period=L, param_length=param_length, e0=float(meta.get("e0", 0.0)),
                    mode=meta.get("mode", "vortex"),
                    vortex_z=np.array([v[0] for v in vortices], dtype=complex),
                    vortex_strength=np.array([v[1] for v in vortices], dtype=float), path=path)


def load_timeseries(directory: str) -> pd.DataFrame:
    path = os.path.join(directory, TIMESERIES_FILE)
    if not os.path.exists(path):
        raise FileNotFoundError(f"Time series not found at: {path}")
    return pd.read_csv(path, sep=r"\s+")


def load_metadata(directory: str) -> dict:
    path = os.path.join(directory, METADATA_FILE)
    if not os.path.exists(path):
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return toml.load(fh)


def load_bottom(directory: str) -> np.ndarray | None:
    path = os.path.join(directory, BOTTOM_FILE)
    if not os.path.exists(path):
        return None
    table = np.loadtxt(path, ndmin=2)
    return table[:, 0] + 1j * table[:, 1]


def snapshot_paths(directory: str) -> list[str]:
    folder = os.path.join(directory, SNAPSHOT_DIR)
    if not os.path.isdir(folder):
        return []
    return [os.path.join(folder, name) for name in sorted(os.listdir(folder)) if name.startswith("snap_")]


def load_run(directory: str) -> RunData:
    """
    Loads a run directory written by RunWriter.

    Args:
        directory (str): the run directory.

    Returns:
        RunData: time series DataFrame, snapshots in save order and the metadata dict
            (empty when the run never finished writing it).

    Raises:
        FileNotFoundError: if the directory has no time series.
    """
    return RunData(timeseries=load_timeseries(directory),
                   snapshots=[load_snapshot(p) for p in snapshot_paths(directory)],
                   metadata=load_metadata(directory), directory=directory)


def list_runs(root: str) -> list[str]:
    """Run directories (those holding a time series) directly under root."""
    if not os.path.isdir(root):
        return []
    return sorted(os.path.join(root, name) for name in os.listdir(root)
                  if os.path.exists(os.path.join(root, name, TIMESERIES_FILE)))
