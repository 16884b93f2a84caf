"""Conserved quantities, the Hausdorff error and per-step run records."""
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from core.boundary_solve import BackgroundField, background_on_bottom, background_stream, background_velocity
from core.config import PhysParams
from core.errors import ConfigurationError
from core.geometry import Curve, enclosed_area
from core.kernels import (KernelContext, dipole_stream, dipole_stream_on_curve, log_matrix, plemelj_limits,
                          sheet_densities, sheet_stream, sheet_stream_on_curve, sheet_velocity, vortex_velocity)

logger = logging.getLogger(__name__)

HAUSDORFF_SAMPLES = 2**17

TIMESERIES_COLUMNS = ("time", "mass", "energy", "cfl", "cfl_max", "circulation", "compat_residual",
                      "fixed_point_iters")


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    energy: float
    cfl: float
    cfl_max: float
    circulation: float
    compat_residual: float
    fixed_point_iters: int

    def __post_init__(self):
        values = [getattr(self, name) for name in TIMESERIES_COLUMNS]
        if not np.all(np.isfinite(np.asarray(values, dtype=float))):
            raise ValueError(f"non-finite diagnostics at t={self.time}")

    def as_row(self) -> dict:
        return asdict(self)


def mass(state, params: PhysParams) -> float:
    """
    rho_F times the fluid area per period, from boundary integrals of y x_e.

    In deep water only the surface term remains, which still measures changes of mass.
    """
    return params.rho_F * enclosed_area(state.surface, state.bottom)


def _potential_energy(state, params: PhysParams) -> float:
    s = state.surface
    total = s.param_step * float(np.sum(s.points.imag**2 * s.d1.real))
    if state.bottom is not None:
        b = state.bottom
        total -= b.param_step * float(np.sum(b.points.imag**2 * b.d1.real))
    return 0.5 * params.rho_F * params.g * total


def _vortex_stream(ctx: KernelContext, vz: np.ndarray, vs: np.ndarray, x: np.ndarray) -> np.ndarray:
    if vz.size == 0:
        return np.zeros(x.shape)
    return log_matrix(ctx, x, vz) @ vs / (4.0 * np.pi)


def _traces_vortex(ctx: KernelContext, state):
    """Fluid-side velocity and stream function on the surface and bottom nodes, vortex mode."""
    s, b = state.surface, state.bottom
    gamma = np.asarray(state.density, dtype=float)
    u_s = plemelj_limits(ctx, s, gamma, "below") + vortex_velocity(ctx, state.vortex_z, state.vortex_strength, s.points)
    psi_s = sheet_stream_on_curve(ctx, s, gamma) + _vortex_stream(ctx, state.vortex_z, state.vortex_strength, s.points)
    if b is None:
        return u_s, psi_s, None, None
    gB = state.bottom_values
    u_s = u_s + sheet_velocity(ctx, b, gB, s.points)
    psi_s = psi_s + sheet_stream(ctx, b, gB, s.points)
    u_b = (plemelj_limits(ctx, b, gB, "above") + sheet_velocity(ctx, s, gamma, b.points)
           + vortex_velocity(ctx, state.vortex_z, state.vortex_strength, b.points))
    psi_b = (sheet_stream_on_curve(ctx, b, gB) + sheet_stream(ctx, s, gamma, b.points)
             + _vortex_stream(ctx, state.vortex_z, state.vortex_strength, b.points))
    return u_s, psi_s, u_b, psi_b


def _traces_dipole(ctx: KernelContext, state, background: BackgroundField | None):
    """Same as _traces_vortex for a dipole-mode state plus its background."""
    s, b = state.surface, state.bottom
    mu = np.asarray(state.density, dtype=float)
    gS, gB = sheet_densities(state)
    u_s = plemelj_limits(ctx, s, gS, "below")
    psi_s = dipole_stream_on_curve(ctx, s, mu)
    if background is not None:
        u_s = u_s + np.atleast_1d(background_velocity(background, s.points))
        psi_s = psi_s + background_stream(background, s.points)
    if b is None:
        return u_s, psi_s, None, None
    mu_B = state.bottom_values
    u_s = u_s + sheet_velocity(ctx, b, gB, s.points)
    psi_s = psi_s + dipole_stream(ctx, b, mu_B, s.points)
    u_b = plemelj_limits(ctx, b, gB, "above") + sheet_velocity(ctx, s, gS, b.points)
    psi_b = dipole_stream_on_curve(ctx, b, mu_B) + dipole_stream(ctx, s, mu, b.points)
    if background is not None:
        u_bg, psi_bg = background_on_bottom(background, b)
        u_b, psi_b = u_b + u_bg, psi_b + psi_bg
    return u_s, psi_s, u_b, psi_b


def energy(state, params: PhysParams, background: BackgroundField | None = None,
           ctx: KernelContext | None = None) -> float:
    """
    Kinetic plus potential energy per period from boundary integrals.

    Kinetic: -(rho_F/2) int Re[u_F z_S,e] psi + (rho_F/2) int Re[u_F z_B,e] psi, with the
    fluid-side traces of the velocity and the on-sheet stream function. Potential:
    (rho_F g/2)(int y^2 x_e over the surface minus the same over the bottom).

    The area integral carried by a uniform vorticity is not included; with
    omega0 != 0 the vortex form also leaves out the vorticity's own velocity.

    Args:
        state (SheetState): state with its bottom density current.
        params (PhysParams): physical constants.
        background (BackgroundField, optional): stationary field of a dipole run.
        ctx (KernelContext, optional): strip period.

    Returns:
        float: the energy.
    """
    ctx = ctx or KernelContext(state.surface.horizontal_period)
    if state.mode == "vortex":
        u_s, psi_s, u_b, psi_b = _traces_vortex(ctx, state)
    else:
        u_s, psi_s, u_b, psi_b = _traces_dipole(ctx, state, background)
    s = state.surface
    kinetic = -s.param_step * float(np.sum(np.real(u_s * s.d1) * psi_s))
    if state.bottom is not None:
        b = state.bottom
        kinetic += b.param_step * float(np.sum(np.real(u_b * b.d1) * psi_b))
    return 0.5 * params.rho_F * kinetic + _potential_energy(state, params)


def mu_compatibility_residual(state) -> float:
    """|de_S sum mu_S Re z_S,e + de_B sum mu_B Re z_B,e|, which vanishes for exact dipole densities."""
    if state.mode != "dipole":
        raise ConfigurationError("the dipole compatibility residual needs a dipole-mode state")
    s = state.surface
    total = s.param_step * float(np.sum(state.density * s.d1.real))
    if state.bottom is not None:
        b = state.bottom
        total += b.param_step * float(np.sum(state.bottom_values * b.d1.real))
    return abs(total)


def circulation_total(state, background: BackgroundField | None = None) -> float:
    """Circulation carried by the surface sheet, the point vortices and the background."""
    gS, _ = sheet_densities(state)
    total = state.surface.param_step * float(np.sum(gS)) + float(np.sum(state.vortex_strength))
    if background is not None:
        total += background.gamma + float(np.sum(background.vortex_strength))
    return total


def resample_curve(c: Curve, n: int = HAUSDORFF_SAMPLES) -> np.ndarray:
    """Periodic cubic interpolation of a curve in its parameter onto n uniform points."""
    slope = c.horizontal_period / c.param_length
    e = c.params
    periodic = c.points - slope * (e - c.e0)
    e_closed = np.append(e, c.e0 + c.param_length)
    fine = c.e0 + c.param_length * np.arange(n) / n
    spline = CubicSpline(e_closed, np.append(periodic, periodic[0]), bc_type="periodic")
    return spline(fine) + slope * (fine - c.e0)


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.real((points - a) * np.conj(ab)) / np.maximum(np.abs(ab) ** 2, 1e-300)
    return np.abs(points - (a + np.clip(t, 0.0, 1.0) * ab))


def _directed(points: np.ndarray, target: np.ndarray, L: float) -> float:
    """Largest distance from the points to the polyline through target and its +-L images."""
    polyline = np.concatenate([target - L, target, target + L])
    # Fold onto the period starting at target[0] so the images cover every neighbour.
    folded = points - L * np.floor((points.real - target[0].real) / L)
    tree = cKDTree(np.column_stack([polyline.real, polyline.imag]))
    _, j = tree.query(np.column_stack([folded.real, folded.imag]))
    before = np.maximum(j - 1, 0)
    after = np.minimum(j + 1, polyline.size - 1)
    dist = np.minimum(_segment_distance(folded, polyline[before], polyline[j]),
                      _segment_distance(folded, polyline[j], polyline[after]))
    return float(np.max(dist))


def hausdorff(z1: Curve, z2: Curve, n_samples: int = HAUSDORFF_SAMPLES) -> float:
    """
    Symmetric Hausdorff distance between two periodic curves.

    Both curves are resampled to n_samples points; each sample is measured to the
    nearest segment of the other resampled polyline, horizontal period included.

    Args:
        z1 (Curve): first curve.
        z2 (Curve): second curve, with the same horizontal period.
        n_samples (int): resampling size.

    Returns:
        float: max of the two directed max-min distances.
    """
    if not np.isclose(z1.horizontal_period, z2.horizontal_period):
        raise ValueError("curves have different horizontal periods")
    L = z1.horizontal_period
    p1 = resample_curve(z1, n_samples)
    p2 = resample_curve(z2, n_samples)
    return max(_directed(p1, p2, L), _directed(p2, p1, L))


def relative_drift(values) -> float:
    """max |v - v0| / |v0| over a series (absolute when v0 vanishes)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    scale = abs(v[0]) if v[0] != 0.0 else 1.0
    return float(np.max(np.abs(v - v[0])) / scale)


def record(state, params: PhysParams, background: BackgroundField | None = None, cfl: float = 0.0,
           cfl_max: float = 0.0, fixed_point_iters: int = 0) -> DiagnosticsRecord:
    """Diagnostics of one saved step."""
    compat = mu_compatibility_residual(state) if state.mode == "dipole" else 0.0
    return DiagnosticsRecord(time=state.time, mass=mass(state, params), energy=energy(state, params, background),
                             cfl=cfl, cfl_max=cfl_max, circulation=circulation_total(state, background),
                             compat_residual=compat, fixed_point_iters=fixed_point_iters)


if __name__ == '__main__':
    from core.geometry import graph_curve
    L, N = 2 * np.pi, 128
    x = L * np.arange(N) / N
    a = graph_curve(x, 0.1 * np.cos(x), L)
    b = graph_curve(x, 0.11 * np.cos(x), L)
    print(f"hausdorff = {hausdorff(a, b, 2**14):.6f} (expected about 0.01)")
