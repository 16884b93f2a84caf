"""Staggered Verlet integration of the interface and its density.

Positions Z (surface nodes and point vortices) live on whole steps, the
density X on half steps. Each half of a step is an implicit midpoint relation
solved by plain fixed-point relaxation; the bottom density is re-solved for
every iterate.
"""
import logging
from dataclasses import dataclass

import numpy as np

from core.boundary_solve import BackgroundField
from core.config import Formulation, FilterSpec, OffsetSpec, PhysParams, StepConfig
from core.dipole_dynamics import dipole_rates, refresh_mu_B
from core.errors import ConfigurationError, FixedPointError, GeometryDegenerationError
from core.geometry import with_points
from core.kernels import KernelContext
from core.operators import OperatorCache
from core.regularize import filter_curve_points, fourier_filter
from core.vortex_dynamics import refresh_bottom, vortex_rates

logger = logging.getLogger(__name__)


@dataclass
class Dynamics:
    """Everything a right-hand-side evaluation needs besides the state."""
    formulation: Formulation
    params: PhysParams
    cache: OperatorCache
    background: BackgroundField | None = None
    offset: OffsetSpec | None = None
    oec: bool = False

    def __post_init__(self):
        if self.formulation not in ("vortex", "dipole"):
            raise ConfigurationError(f"unknown formulation {self.formulation!r}")
        if self.offset is not None and self.formulation != "vortex":
            raise ConfigurationError("the curve offset applies to the vortex formulation only")
        if self.oec and self.formulation != "dipole":
            raise ConfigurationError("odd-even smoothing applies to the dipole formulation only")

    @property
    def ctx(self) -> KernelContext:
        return self.cache.ctx

    def refresh(self, state):
        """State with its bottom density solved for the current surface and density."""
        if self.formulation == "vortex":
            return refresh_bottom(state, self.params, self.cache)
        return refresh_mu_B(state, self.cache)

    def rates(self, state, with_density: bool = True):
        """(dz_S/dt, dz_v/dt, dX/dt) for a refreshed state; dX/dt is None when skipped."""
        if self.formulation == "vortex":
            return vortex_rates(state, self.params, self.cache, self.ctx, self.offset, with_density)
        dt_z, dt_mu = dipole_rates(state, self.params, self.cache, self.background, self.ctx,
                                   with_density, self.oec)
        return dt_z, np.zeros(0, dtype=complex), dt_mu


@dataclass
class StepReport:
    density_iterations: int
    position_iterations: int
    residual: float
    cfl: float
    cfl_max: float


def cfl_number(state, dt_z, dt: float, de: float | None = None) -> float:
    """
    min over nodes of |dz/dt| dt / (|z_e| de).

    Args:
        state (SheetState): state whose surface supplies |z_e|.
        dt_z (np.ndarray): node velocities.
        dt (float): time step.
        de (float, optional): parameter step; taken from the surface when missing.

    Returns:
        float: the CFL number.
    """
    s = state.surface
    de = s.param_step if de is None else de
    return float(np.min(np.abs(dt_z) * dt / (s.speed * de)))


def cfl_max_number(state, dt_z, dt: float, de: float | None = None) -> float:
    s = state.surface
    de = s.param_step if de is None else de
    return float(np.max(np.abs(dt_z) * dt / (s.speed * de)))


def choose_dt(state, dynamics: Dynamics, cfl_target: float) -> float:
    """Time step putting the largest node displacement at cfl_target local spacings.

    Falls back to cfl_target * min spacing / sqrt(g L) when the initial state is at rest.
    """
    state = dynamics.refresh(state)
    dt_z, _, _ = dynamics.rates(state, with_density=False)
    s = state.surface
    spacing = s.speed * s.param_step
    speed = np.abs(dt_z)
    if float(np.max(speed)) == 0.0:
        return cfl_target * float(np.min(spacing)) / np.sqrt(dynamics.params.g * s.horizontal_period)
    return cfl_target * float(np.min(spacing / np.maximum(speed, 1e-300)))


def _settled(residual: float, previous: float, scale: float, cfg: StepConfig) -> bool:
    """Converged to fixed_point_tol, or stalled at round-off below fixed_point_floor."""
    if residual < cfg.fixed_point_tol * scale:
        return True
    return residual < cfg.fixed_point_floor * scale and residual >= previous


def _unsettled(what: str, residual: float, scale: float, cfg: StepConfig) -> FixedPointError | None:
    """The error for an exhausted relaxation, or None when its last increment is under the floor."""
    if np.isfinite(residual) and residual < cfg.fixed_point_floor * scale:
        logger.debug("%s accepted at the round-off floor (last increment %.3e)", what, residual)
        return None
    return FixedPointError(f"{what} did not settle in {cfg.fixed_point_max_iters} iterations "
                           f"(last increment {residual:.3e})", residual=residual)


def _density_step(dynamics: Dynamics, state, lag: np.ndarray, dt: float, cfg: StepConfig):
    """Solves X+ = X- + dt G(Z^n, (X+ + X-)/2) by relaxation."""
    guess = dynamics.refresh(state)
    _, _, rate = dynamics.rates(guess)
    x_new = lag + dt * rate
    residual, it = float("inf"), 0
    for it in range(1, cfg.fixed_point_max_iters + 1):
        mid = dynamics.refresh(state.evolve(density=0.5 * (x_new + lag)))
        _, _, rate = dynamics.rates(mid)
        x_next = lag + dt * rate
        previous, residual = residual, float(np.max(np.abs(x_next - x_new)))
        x_new = x_next
        if not np.isfinite(residual):
            break
        if _settled(residual, previous, max(1.0, float(np.max(np.abs(x_new)))), cfg):
            return x_new, it, residual
    error = _unsettled("density half-step", residual, max(1.0, float(np.max(np.abs(x_new)))), cfg)
    if error is not None:
        raise error
    return x_new, it, residual


def _position_step(dynamics: Dynamics, state, x_half: np.ndarray, dt: float, cfg: StepConfig):
    """Solves Z+ = Z + dt F((Z+ + Z)/2, X^{n+1/2}) by relaxation."""
    z0 = state.surface.points
    v0 = state.vortex_z
    frozen = dynamics.refresh(state.evolve(density=x_half))
    dt_z, dt_v, _ = dynamics.rates(frozen, with_density=False)
    z_new, v_new = z0 + dt * dt_z, v0 + dt * dt_v
    residual, it = float("inf"), 0
    for it in range(1, cfg.fixed_point_max_iters + 1):
        mid_surface = with_points(state.surface, 0.5 * (z_new + z0))
        mid = dynamics.refresh(state.evolve(surface=mid_surface, density=x_half,
                                            vortex_z=0.5 * (v_new + v0)))
        dt_z, dt_v, _ = dynamics.rates(mid, with_density=False)
        z_next, v_next = z0 + dt * dt_z, v0 + dt * dt_v
        previous, residual = residual, float(np.max(np.abs(z_next - z_new)))
        if v_next.size:
            residual = max(residual, float(np.max(np.abs(v_next - v_new))))
        z_new, v_new = z_next, v_next
        if not np.isfinite(residual):
            break
        if _settled(residual, previous, max(1.0, float(np.max(np.abs(z_new)))), cfg):
            return z_new, v_new, dt_z, it, residual
    error = _unsettled("position step", residual, max(1.0, float(np.max(np.abs(z_new)))), cfg)
    if error is not None:
        raise error
    return z_new, v_new, dt_z, it, residual


def bootstrap(state, dynamics: Dynamics, dt: float):
    """State carrying X^{-1/2} = X^0 - (dt/2) G(Z^0, X^0) as its lagged density."""
    refreshed = dynamics.refresh(state)
    _, _, rate = dynamics.rates(refreshed)
    return refreshed.evolve(density_lag=refreshed.density - 0.5 * dt * rate)


def verlet_step(state, dynamics: Dynamics, cfg: StepConfig, dt: float | None = None,
                filter_spec: FilterSpec | None = None, min_speed0: float | None = None,
                degeneration_ratio: float = 1e-3):
    """
    Advances a state by one staggered Verlet step.

    The state enters with Z^n on its surface and X^{n-1/2} as density_lag (the
    first call bootstraps it) and leaves with Z^{n+1}, X^{n+1/2} as density_lag
    and the extrapolated X^{n+1} as density.

    Args:
        state (SheetState): current state.
        dynamics (Dynamics): right-hand sides and static operators.
        cfg (StepConfig): fixed-point settings; cfg.dt is used when dt is missing.
        dt (float, optional): time step.
        filter_spec (FilterSpec, optional): low-pass filter applied to positions and densities after the step.
        min_speed0 (float, optional): initial min |z_e| for the degeneration check.
        degeneration_ratio (float): fraction of min_speed0 below which the surface counts as degenerate.

    Returns:
        tuple[SheetState, StepReport]: the advanced state and how it was reached.

    Raises:
        FixedPointError: if a half-step relaxation does not settle.
        GeometryDegenerationError: if |z_e| collapses below degeneration_ratio of its initial minimum.
    """
    dt = dt if dt is not None else cfg.dt
    if dt is None or dt <= 0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    if state.density_lag is None:
        state = bootstrap(state, dynamics, dt)
    lag = state.density_lag

    x_half, n_x, res_x = _density_step(dynamics, state, lag, dt, cfg)
    z_new, v_new, dt_z, n_z, res_z = _position_step(dynamics, state, x_half, dt, cfg)

    surface = with_points(state.surface, z_new)
    x_next = x_half + 0.5 * (x_half - lag)
    if filter_spec is not None:
        surface = with_points(surface, filter_curve_points(surface, filter_spec))
        x_half = fourier_filter(x_half, filter_spec)
        x_next = fourier_filter(x_next, filter_spec)

    min_speed = float(np.min(surface.speed))
    if min_speed0 is not None and min_speed < degeneration_ratio * min_speed0:
        raise GeometryDegenerationError(
            f"|z_e| fell to {min_speed:.3e} (initial minimum {min_speed0:.3e})")

    new_state = dynamics.refresh(state.evolve(surface=surface, density=x_next, density_lag=x_half,
                                              vortex_z=v_new, time=state.time + dt))
    report = StepReport(density_iterations=n_x, position_iterations=n_z, residual=max(res_x, res_z),
                        cfl=cfl_number(state, dt_z, dt), cfl_max=cfl_max_number(state, dt_z, dt))
    logger.debug("t=%.6f: %d density / %d position iterations, CFL min %.3e max %.3e",
                 new_state.time, n_x, n_z, report.cfl, report.cfl_max)
    return new_state, report


if __name__ == '__main__':
    from core.geometry import flat_curve, graph_curve
    from core.operators import build_operator_cache
    from core.state import make_state
    L, N = 2 * np.pi, 32
    x = L * np.arange(N) / N
    bottom = flat_curve(N, L, height=-1.0)
    params = PhysParams()
    dyn = Dynamics("vortex", params, build_operator_cache(KernelContext(L), bottom, "vortex"))
    state = make_state(graph_curve(x, 1e-3 * np.cos(x), L), np.zeros(N), bottom=bottom)
    state, report = verlet_step(state, dyn, StepConfig(dt=0.05))
    print(f"t={state.time:.2f}, iterations {report.density_iterations}/{report.position_iterations}")
