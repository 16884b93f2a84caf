"""Right-hand sides of the vortex-sheet formulation.

Surface sums are evaluated at the dual nodes (midpoints) with all primal
sources, then averaged back onto the primal nodes.
"""
import logging
from dataclasses import dataclass

import numpy as np

from core.boundary_solve import solve_gamma_B
from core.config import OffsetSpec, PhysParams
from core.errors import ConfigurationError, ProximityError
from core.geometry import (Curve, curvature_array, dual_curve, interp_to_primal, min_spacing,
                           periodic_derivative, to_dual)
from core.kernels import (KernelContext, cot_matrix, desingularized_pv, plemelj_limits, sheet_velocity, sin2_matrix,
                          vortex_velocity, vorticity_velocity, vorticity_velocity_rate)
from core.operators import OperatorCache, assemble_coupling_V, dense_solve, solve_calA_V
from core.regularize import assemble_AS_offset, offset_self_rate, offset_self_velocity

logger = logging.getLogger(__name__)


@dataclass
class VortexWorkspace:
    """Quantities shared by the velocity and density right-hand sides of one evaluation."""
    ctx: KernelContext
    dual: Curve
    gamma_dual: np.ndarray
    u_self_dual: np.ndarray
    u_other_dual: np.ndarray
    u_mean: np.ndarray
    dt_zbar: np.ndarray
    dt_z_vortex: np.ndarray

    @property
    def u_mean_dual(self) -> np.ndarray:
        return self.u_self_dual + self.u_other_dual


def _context(state, ctx: KernelContext | None) -> KernelContext:
    return ctx or KernelContext(state.surface.horizontal_period)


def check_vortex_clearance(state) -> None:
    """Raises ProximityError when a vortex sits within one node spacing of a sheet or of another vortex."""
    if state.n_vortices == 0:
        return
    gap = min_spacing(state.surface)
    L = state.surface.horizontal_period
    for curve in (state.surface, state.bottom):
        if curve is None:
            continue
        d = state.vortex_z[:, None] - curve.points[None, :]
        d = d - L * np.round(d.real / L)
        if np.min(np.abs(d)) < gap:
            raise ProximityError(f"a point vortex came within {gap:.3e} of a sheet")
    if state.n_vortices > 1:
        d = state.vortex_z[:, None] - state.vortex_z[None, :]
        d = d - L * np.round(d.real / L)
        np.fill_diagonal(d, np.inf)
        if np.min(np.abs(d)) < gap:
            raise ProximityError("two point vortices collided")


def refresh_bottom(state, params: PhysParams, cache: OperatorCache):
    """State with gamma_B re-solved for the current surface, density and vortices."""
    if cache.deep_water:
        return state
    return state.evolve(bottom_density=solve_gamma_B(state, cache, params.gamma, params.omega0))


def _other_velocity(ctx, state, params: PhysParams, x) -> np.ndarray:
    """Bottom sheet, point vortices and uniform vorticity at points off those sources."""
    u = vortex_velocity(ctx, state.vortex_z, state.vortex_strength, x)
    if state.bottom is not None:
        u = u + sheet_velocity(ctx, state.bottom, state.bottom_values, x)
    return u + vorticity_velocity(ctx, state.surface, state.bottom, params.omega0, x)


def vortex_workspace(state, params: PhysParams, ctx: KernelContext | None = None,
                     offset: OffsetSpec | None = None) -> VortexWorkspace:
    ctx = _context(state, ctx)
    check_vortex_clearance(state)
    s = state.surface
    dual = dual_curve(s)
    gamma = np.asarray(state.density, dtype=float)
    gamma_dual = to_dual(gamma)
    if offset is None:
        u_self = desingularized_pv(ctx, s, gamma, dual.points, dual.d1, gamma_dual)
    else:
        u_self = offset_self_velocity(ctx, s, gamma, dual.points, dual.d1, gamma_dual, offset)
    u_other = _other_velocity(ctx, state, params, dual.points)
    u_mean_dual = u_self + u_other
    tangential = 0.5 * (2.0 * params.alpha - 1.0) * gamma_dual / dual.d1
    dt_zbar = interp_to_primal(u_mean_dual + tangential)
    dt_z_vortex = (np.conj(vortex_point_velocities(state, params, ctx)) if state.n_vortices
                   else np.zeros(0, dtype=complex))
    return VortexWorkspace(ctx=ctx, dual=dual, gamma_dual=gamma_dual, u_self_dual=u_self,
                           u_other_dual=u_other, u_mean=interp_to_primal(u_mean_dual),
                           dt_zbar=dt_zbar, dt_z_vortex=dt_z_vortex)


def surface_velocity_vortex(state, params: PhysParams, ctx: KernelContext | None = None,
                            offset: OffsetSpec | None = None) -> np.ndarray:
    """
    Conjugated node velocities d(conj z_S)/dt of the vortex formulation.

    The tangential weight alpha selects between the fluid-side (alpha = 1) and
    air-side (alpha = 0) traces; it only moves nodes along the surface.

    Args:
        state (SheetState): vortex-mode state with gamma_B current.
        params (PhysParams): physical constants.
        ctx (KernelContext, optional): strip period.
        offset (OffsetSpec, optional): curve-offset regularization of the self term.

    Returns:
        np.ndarray: complex conjugated velocities at the surface nodes.

    Raises:
        ProximityError: if a point vortex touches the surface.
    """
    return vortex_workspace(state, params, ctx, offset).dt_zbar


def vortex_point_velocities(state, params: PhysParams, ctx: KernelContext | None = None) -> np.ndarray:
    """Conjugated velocities of the point vortices, each excluding its own field."""
    ctx = _context(state, ctx)
    if state.n_vortices == 0:
        return np.zeros(0, dtype=complex)
    z = state.vortex_z
    u = sheet_velocity(ctx, state.surface, state.density, z)
    if state.bottom is not None:
        u = u + sheet_velocity(ctx, state.bottom, state.bottom_values, z)
    u = u + vortex_velocity(ctx, z, state.vortex_strength, z, skip_self=True)
    return u + vorticity_velocity(ctx, state.surface, state.bottom, params.omega0, z)


def compute_Psi_S(state, params: PhysParams, ctx: KernelContext | None = None,
                  on_dual: bool = True) -> np.ndarray:
    """
    Psi_S = Re[z_e (u_above + u_below)] = 2 Re[z_e u_mean] at the surface nodes.

    With on_dual the sums are taken at the midpoints and averaged back; otherwise
    the node-collocated one-sided limits are used directly.
    """
    ctx = _context(state, ctx)
    if on_dual:
        ws = vortex_workspace(state, params, ctx)
        return interp_to_primal(2.0 * np.real(ws.dual.d1 * ws.u_mean_dual))
    s = state.surface
    above = plemelj_limits(ctx, s, state.density, "above")
    below = plemelj_limits(ctx, s, state.density, "below")
    if params.omega0 != 0.0:
        raise ConfigurationError("node-collocated Psi_S does not support uniform vorticity")
    others = _other_velocity(ctx, state, params, s.points)
    return np.real(s.d1 * (above + below + 2.0 * others))


def _psi_geometry(ws: VortexWorkspace, state, params: PhysParams, dt_z: np.ndarray,
                  offset: OffsetSpec | None) -> np.ndarray:
    """Half of dPsi_S/dt at frozen sheet densities, on the primal nodes."""
    ctx = ws.ctx
    s = state.surface
    dual = ws.dual
    de = s.param_step
    gamma = np.asarray(state.density, dtype=float)
    dt_z_e = periodic_derivative(dt_z, de)
    dt_zd = to_dual(dt_z)
    dt_zd_e = periodic_derivative(dt_zd, de)

    if offset is None:
        K = cot_matrix(ctx, dual.points, s.points)
        S = sin2_matrix(ctx, dual.points, s.points)
        weight = gamma[None, :] * dual.d1[:, None] - ws.gamma_dual[:, None] * s.d1[None, :]
        weight_rate = gamma[None, :] * dt_zd_e[:, None] - ws.gamma_dual[:, None] * dt_z_e[None, :]
        rel = dt_zd[:, None] - dt_z[None, :]
        self_part = de * np.sum(-S * rel * weight + K * weight_rate, axis=1)
        self_rate = np.real(self_part)
    else:
        self_rate = offset_self_rate(ctx, s, gamma, dual.points, dual.d1, dt_zd, dt_zd_e,
                                     dt_z, dt_z_e, offset)

    u_other = ws.u_other_dual
    du_other = np.zeros(dual.n_points, dtype=complex)
    if state.bottom is not None:
        Sb = sin2_matrix(ctx, dual.points, state.bottom.points)
        du_other -= state.bottom.param_step * (Sb @ state.bottom_values) * dt_zd
    if state.n_vortices:
        Sv = sin2_matrix(ctx, dual.points, state.vortex_z)
        rel_v = dt_zd[:, None] - ws.dt_z_vortex[None, :]
        du_other -= np.sum(Sv * rel_v * state.vortex_strength[None, :], axis=1)
    du_other += vorticity_velocity_rate(ctx, s, dt_z, dt_z_e, state.bottom, params.omega0,
                                        dual.points, dt_zd)
    other_rate = np.real(dt_zd_e * u_other + dual.d1 * du_other)
    return interp_to_primal(self_rate + other_rate)


def _G_V2(ctx, state, params: PhysParams, cache: OperatorCache, dt_z: np.ndarray,
          dt_z_vortex: np.ndarray) -> np.ndarray:
    """Time derivative of the bottom no-flux rows at frozen densities, negated; last entry 0."""
    b_dual = cache.bottom_dual
    n_b = cache.bottom.n_points
    t = b_dual.points[: n_b - 1]
    t_e = b_dual.d1[: n_b - 1]
    s = state.surface
    S = sin2_matrix(ctx, t, s.points)
    rate = s.param_step * (S @ (np.asarray(state.density) * dt_z))
    if state.n_vortices:
        Sv = sin2_matrix(ctx, t, state.vortex_z)
        rate = rate + Sv @ (state.vortex_strength * dt_z_vortex)
    dt_z_e = periodic_derivative(dt_z, s.param_step)
    rate = rate + vorticity_velocity_rate(ctx, s, dt_z, dt_z_e, cache.bottom, params.omega0,
                                          t, np.zeros(t.shape, dtype=complex))
    G = np.zeros(n_b)
    G[: n_b - 1] = -np.imag(t_e * rate)
    return G


def G_V1(state, params: PhysParams, ws: VortexWorkspace, dt_z: np.ndarray,
         offset: OffsetSpec | None = None) -> np.ndarray:
    """Right-hand side of the surface density equation at the primal nodes."""
    s = state.surface
    de = s.param_step
    A = params.A_tw
    alpha = params.alpha
    gamma = np.asarray(state.density, dtype=float)
    jump = 0.5 * gamma / s.d1
    u_F = ws.u_mean + jump
    u_A = ws.u_mean - jump
    dt_z_e = periodic_derivative(dt_z, de)
    speed2 = np.abs(s.d1) ** 2

    psi_geom = _psi_geometry(ws, state, params, dt_z, offset)
    G = -A * psi_geom
    if alpha != 1.0:
        G -= 0.5 * (1.0 + A) * (1.0 - alpha) * gamma / speed2 * np.real(s.d1 * periodic_derivative(u_F, de))
    if A != 1.0:
        G -= 0.5 * (1.0 - A) * alpha * gamma / speed2 * np.real(s.d1 * periodic_derivative(u_A, de))
    G -= params.g * A * s.d1.imag
    G += np.real((0.5 * (1.0 + A) * u_F - 0.5 * (1.0 - A) * u_A) * dt_z_e)
    if params.sigma != 0.0:
        kappa_p = -curvature_array(s)
        G -= (1.0 + A) * params.sigma / (2.0 * params.rho_F) * periodic_derivative(kappa_p, de)
    return G


def dt_gamma_S(state, params: PhysParams, cache: OperatorCache, dt_z: np.ndarray | None = None,
               ctx: KernelContext | None = None, offset: OffsetSpec | None = None,
               workspace: VortexWorkspace | None = None) -> np.ndarray:
    """
    Time derivative of the surface vortex-sheet density.

    Solves (A_S - C_V B_B^-1 D_V) x = G_V1 - C_V B_B^-1 G_V2, where the bottom
    blocks drop out in deep water.

    Args:
        state (SheetState): vortex-mode state with gamma_B current.
        params (PhysParams): physical constants.
        cache (OperatorCache): static bottom operators.
        dt_z (np.ndarray, optional): surface node velocities dz/dt; computed when missing.
        ctx (KernelContext, optional): strip period.
        offset (OffsetSpec, optional): curve-offset regularization.
        workspace (VortexWorkspace, optional): reuse of an existing evaluation.

    Returns:
        np.ndarray: d(gamma_S)/dt at the surface nodes.

    Raises:
        NeumannDivergenceError: never; a stalled fixed point falls back to LU.
        FactorizationError: if the fallback system is singular.
    """
    if state.mode != "vortex":
        raise ConfigurationError("dt_gamma_S needs a vortex-mode state")
    ctx = _context(state, ctx)
    ws = workspace or vortex_workspace(state, params, ctx, offset)
    if dt_z is None:
        dt_z = np.conj(ws.dt_zbar)
    s = state.surface
    rhs = G_V1(state, params, ws, dt_z, offset)
    A = params.A_tw

    if offset is not None:
        AS = assemble_AS_offset(ctx, s, A, offset).entries
        if cache.deep_water:
            return dense_solve(AS, rhs)
        C, D = assemble_coupling_V(s, cache.bottom, cache.bottom_dual, A, ctx)
        G2 = _G_V2(ctx, state, params, cache, dt_z, ws.dt_z_vortex)
        M = AS - C.entries @ cache.solve_BB(D.entries)
        return dense_solve(M, rhs - C.entries @ cache.solve_BB(G2))

    if cache.deep_water:
        return solve_calA_V(s, A, None, rhs, ctx)
    C, D = assemble_coupling_V(s, cache.bottom, cache.bottom_dual, A, ctx)
    G2 = _G_V2(ctx, state, params, cache, dt_z, ws.dt_z_vortex)
    return solve_calA_V(s, A, (C, cache, D), rhs - C.entries @ cache.solve_BB(G2), ctx)


def vortex_rates(state, params: PhysParams, cache: OperatorCache, ctx: KernelContext | None = None,
                 offset: OffsetSpec | None = None, with_density: bool = True):
    """
    (dz_S/dt, dz_v/dt, d(gamma_S)/dt) for a state whose gamma_B is current.

    The density rate is skipped (None) when with_density is False.
    """
    ctx = _context(state, ctx)
    ws = vortex_workspace(state, params, ctx, offset)
    dt_z = np.conj(ws.dt_zbar)
    dt_gamma = dt_gamma_S(state, params, cache, dt_z, ctx, offset, ws) if with_density else None
    return dt_z, ws.dt_z_vortex, dt_gamma


def circulation(state) -> float:
    return state.surface.param_step * float(np.sum(state.density))


if __name__ == '__main__':
    from core.geometry import flat_curve
    from core.operators import build_operator_cache
    from core.state import make_state
    L, N = 2 * np.pi, 64
    x = L * np.arange(N) / N
    surface = flat_curve(N, L)
    bottom = flat_curve(N, L, height=-1.0)
    params = PhysParams()
    cache = build_operator_cache(KernelContext(L), bottom, "vortex")
    state = refresh_bottom(make_state(surface, 1e-3 * np.cos(x), bottom=bottom), params, cache)
    dz, _, dg = vortex_rates(state, params, cache)
    print(f"max |dz/dt| = {np.max(np.abs(dz)):.3e}, max |dgamma/dt| = {np.max(np.abs(dg)):.3e}")
