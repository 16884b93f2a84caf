"""Right-hand sides of the dipole formulation.

The state carries the dipole densities mu_S (and mu_B from the last bottom
solve); the vortex-sheet densities are their parameter derivatives.
"""
import logging
from dataclasses import dataclass

import numpy as np

from core.boundary_solve import BackgroundField, background_velocity, solve_mu_B, zero_background
from core.config import PhysParams
from core.errors import ConfigurationError
from core.geometry import (Curve, curvature_array, dual_curve, interp_to_primal, periodic_derivative,
                           to_dual)
from core.kernels import (KernelContext, cot_matrix, desingularized_pv, dipole_potential, sheet_velocity,
                          sin2_matrix)
from core.operators import OperatorCache, assemble_and_solve_calA_D, assemble_coupling_D

logger = logging.getLogger(__name__)


@dataclass
class DipoleWorkspace:
    """Sheet densities and surface traces shared by the velocity and density right-hand sides."""
    ctx: KernelContext
    dual: Curve
    gamma_tilde_S: np.ndarray
    gamma_tilde_B: np.ndarray
    u_mean: np.ndarray
    u_background: np.ndarray
    grad_phi_F: np.ndarray
    grad_phi_A: np.ndarray
    dt_zbar: np.ndarray


def _context(state, ctx: KernelContext | None) -> KernelContext:
    return ctx or KernelContext(state.surface.horizontal_period)


def gamma_from_mu(mu, de: float) -> np.ndarray:
    """Vortex-sheet density d(mu)/de by periodic central differences."""
    return periodic_derivative(np.asarray(mu, dtype=float), de)


def check_dipole_mode(state, params: PhysParams, background: BackgroundField) -> None:
    """
    Raises ConfigurationError for combinations the dipole formulation does not cover.

    A two-fluid run must have no circulation, no vorticity, no point vortices and
    no background field.
    """
    if state.mode != "dipole":
        raise ConfigurationError("the dipole right-hand side needs a dipole-mode state")
    if params.single_fluid:
        return
    if params.gamma != 0.0 or params.omega0 != 0.0 or state.n_vortices or background.kind != "zero":
        raise ConfigurationError(
            "a two-fluid dipole run needs zero circulation, zero vorticity and a zero background")


def refresh_mu_B(state, cache: OperatorCache):
    """State with mu_B re-solved for the current surface and mu_S."""
    if cache.deep_water:
        return state
    return state.evolve(bottom_density=solve_mu_B(state, cache))


def dipole_workspace(state, params: PhysParams, background: BackgroundField | None = None,
                     ctx: KernelContext | None = None) -> DipoleWorkspace:
    ctx = _context(state, ctx)
    background = background or zero_background(state.surface.horizontal_period)
    check_dipole_mode(state, params, background)
    s = state.surface
    dual = dual_curve(s)
    gS = gamma_from_mu(state.density, s.param_step)
    gS_dual = to_dual(gS)
    u_dual = desingularized_pv(ctx, s, gS, dual.points, dual.d1, gS_dual)
    gB = np.zeros(0)
    if state.bottom is not None:
        gB = gamma_from_mu(state.bottom_values, state.bottom.param_step)
        u_dual = u_dual + sheet_velocity(ctx, state.bottom, gB, dual.points)
    tangential = 0.5 * (2.0 * params.alpha - 1.0) * gS_dual / dual.d1
    u_bg = np.atleast_1d(background_velocity(background, s.points))
    u_mean = interp_to_primal(u_dual)
    jump = 0.5 * gS / s.d1
    return DipoleWorkspace(ctx=ctx, dual=dual, gamma_tilde_S=gS, gamma_tilde_B=gB, u_mean=u_mean,
                           u_background=u_bg, grad_phi_F=u_mean + jump, grad_phi_A=u_mean - jump,
                           dt_zbar=interp_to_primal(u_dual + tangential) + u_bg)


def surface_velocity_dipole(state, params: PhysParams, background: BackgroundField | None = None,
                            ctx: KernelContext | None = None) -> np.ndarray:
    """
    Conjugated node velocities d(conj z_S)/dt of the dipole formulation.

    The background is carried with full weight on both traces, so alpha only
    moves nodes along the surface.

    Args:
        state (SheetState): dipole-mode state with mu_B current.
        params (PhysParams): physical constants.
        background (BackgroundField, optional): stationary field; zero when missing.
        ctx (KernelContext, optional): strip period.

    Returns:
        np.ndarray: complex conjugated velocities at the surface nodes.
    """
    return dipole_workspace(state, params, background, ctx).dt_zbar


def compute_Phi_S(state, ctx: KernelContext | None = None) -> np.ndarray:
    """Phi_S = (phi_F + phi_A)(z_S) from the subtracted density mu_S(e') - mu_S(e)."""
    ctx = _context(state, ctx)
    s = state.surface
    mu = np.asarray(state.density, dtype=float)
    K = cot_matrix(ctx, s.points, s.points, skip_diagonal=True)
    diff = mu[None, :] - mu[:, None]
    phi = 2.0 * s.param_step * np.sum(diff * np.real(K * s.d1[None, :]), axis=1)
    if state.bottom is not None:
        phi = phi + 2.0 * dipole_potential(ctx, state.bottom, state.bottom_values, s.points)
    return phi


def surface_potential_traces(state, ctx: KernelContext | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(phi_F, phi_A) on the surface nodes: (Phi_S +- mu_S)/2."""
    phi = compute_Phi_S(state, ctx)
    mu = np.asarray(state.density, dtype=float)
    return 0.5 * (phi + mu), 0.5 * (phi - mu)


def Phi_S_geometric_rate(state, dt_z, ctx: KernelContext | None = None,
                         include_diagonal_limits: bool = False) -> np.ndarray:
    """
    Half of dPhi_S/dt at frozen densities.

    The j = i limits of the sin^-2 and cot sums are equal and opposite; they are
    left out unless include_diagonal_limits is set.
    """
    ctx = _context(state, ctx)
    s = state.surface
    de = s.param_step
    mu = np.asarray(state.density, dtype=float)
    dt_z = np.asarray(dt_z, dtype=complex)
    dt_z_e = periodic_derivative(dt_z, de)
    K = cot_matrix(ctx, s.points, s.points, skip_diagonal=True)
    S = sin2_matrix(ctx, s.points, s.points, skip_diagonal=True)
    diff = mu[None, :] - mu[:, None]
    rel = dt_z[:, None] - dt_z[None, :]
    swept = de * np.sum(-diff * np.real(S * rel * s.d1[None, :]), axis=1)
    stretched = de * np.sum(diff * np.real(K * dt_z_e[None, :]), axis=1)
    if include_diagonal_limits:
        limit = periodic_derivative(mu, de) * np.real(dt_z_e / (2j * np.pi * s.d1))
        swept += de * limit
        stretched -= de * limit
    rate = swept + stretched
    if state.bottom is not None:
        b = state.bottom
        Sb = sin2_matrix(ctx, s.points, b.points)
        rate -= b.param_step * (np.real(Sb * b.d1[None, :] * dt_z[:, None]) @ state.bottom_values)
    return rate


def G_D1(state, params: PhysParams, ws: DipoleWorkspace, dt_z) -> np.ndarray:
    """Right-hand side of the surface dipole equation at the primal nodes."""
    s = state.surface
    A = params.A_tw
    dt_z = np.asarray(dt_z, dtype=complex)
    gF, gA = ws.grad_phi_F, ws.grad_phi_A
    G = -A * Phi_S_geometric_rate(state, dt_z, ws.ctx)
    G += 0.5 * np.real(dt_z * ((A + 1.0) * gF + (A - 1.0) * gA))
    G -= 0.25 * ((A + 1.0) * np.abs(gF + ws.u_background) ** 2 + (A - 1.0) * np.abs(gA) ** 2)
    if params.sigma != 0.0:
        G -= (A + 1.0) * params.sigma / (2.0 * params.rho_F) * (-curvature_array(s))
    G -= params.g * A * s.points.imag
    return G


def G_D2(state, cache: OperatorCache, dt_z, ctx: KernelContext | None = None) -> np.ndarray:
    """Minus the rate of the bottom double-layer identity at frozen densities."""
    ctx = ctx or cache.ctx
    s = state.surface
    b = cache.bottom
    mu = np.asarray(state.density, dtype=float)
    dt_z = np.asarray(dt_z, dtype=complex)
    dt_z_e = periodic_derivative(dt_z, s.param_step)
    K = cot_matrix(ctx, b.points, s.points)
    S = sin2_matrix(ctx, b.points, s.points)
    stretched = np.real(K * dt_z_e[None, :]) @ mu
    swept = np.real(S * (dt_z * s.d1)[None, :]) @ mu
    return -s.param_step * (stretched + swept)


def dt_mu_S(state, params: PhysParams, cache: OperatorCache, dt_z=None,
            background: BackgroundField | None = None, ctx: KernelContext | None = None,
            workspace: DipoleWorkspace | None = None) -> np.ndarray:
    """
    Time derivative of the surface dipole density.

    Solves (A*_S - C_D A*_B^-1 D_D) x = G_D1 - C_D A*_B^-1 G_D2; in deep water
    only A*_S remains.

    Args:
        state (SheetState): dipole-mode state with mu_B current.
        params (PhysParams): physical constants.
        cache (OperatorCache): static bottom operators of the dipole formulation.
        dt_z (np.ndarray, optional): surface node velocities; computed when missing.
        background (BackgroundField, optional): stationary field.
        ctx (KernelContext, optional): strip period.
        workspace (DipoleWorkspace, optional): reuse of an existing evaluation.

    Returns:
        np.ndarray: d(mu_S)/dt at the surface nodes.

    Raises:
        ConfigurationError: for an unsupported two-fluid setting or a vortex-built cache.
        NeumannDivergenceError: if the density fixed point does not settle.
    """
    ctx = _context(state, ctx)
    ws = workspace or dipole_workspace(state, params, background, ctx)
    if dt_z is None:
        dt_z = np.conj(ws.dt_zbar)
    s = state.surface
    A = params.A_tw
    rhs = G_D1(state, params, ws, dt_z)
    if cache.deep_water:
        return assemble_and_solve_calA_D(s, A, None, rhs, ctx)
    if cache.AstarB_inv is None:
        raise ConfigurationError("operator cache was not built for the dipole formulation")
    C, D = assemble_coupling_D(s, cache.bottom, A, ctx)
    B_inv = cache.AstarB_inv
    rhs = rhs - C.entries @ (B_inv @ G_D2(state, cache, dt_z, ctx))
    return assemble_and_solve_calA_D(s, A, (C, B_inv, D), rhs, ctx)


def oec_smooth(dt_mu) -> np.ndarray:
    """(1, 2, 1)/4 periodic smoothing that removes the grid-alternating mode."""
    v = np.asarray(dt_mu, dtype=float)
    return 0.25 * (np.roll(v, 1) + 2.0 * v + np.roll(v, -1))


def dipole_rates(state, params: PhysParams, cache: OperatorCache,
                 background: BackgroundField | None = None, ctx: KernelContext | None = None,
                 with_density: bool = True, oec: bool = False):
    """(dz_S/dt, d(mu_S)/dt) for a state whose mu_B is current; the density rate is None when skipped."""
    ctx = _context(state, ctx)
    ws = dipole_workspace(state, params, background, ctx)
    dt_z = np.conj(ws.dt_zbar)
    if not with_density:
        return dt_z, None
    dt_mu = dt_mu_S(state, params, cache, dt_z, background, ctx, ws)
    return dt_z, oec_smooth(dt_mu) if oec else dt_mu


if __name__ == '__main__':
    from core.boundary_solve import project_compatible, solve_initial_muS
    from core.geometry import flat_curve, graph_curve
    from core.operators import build_operator_cache
    from core.state import make_state
    L, N = 2 * np.pi, 64
    x = L * np.arange(N) / N
    surface = graph_curve(x, 1e-3 * np.cos(x), L)
    bottom = flat_curve(N, L, height=-1.0)
    params = PhysParams()
    cache = build_operator_cache(KernelContext(L), bottom, "dipole")
    g_normal = project_compatible(surface, 1e-3 * np.sin(x) * np.sqrt(np.tanh(1.0)))
    mu_S, mu_B = solve_initial_muS(surface, bottom, g_normal, zero_background(L), cache)
    state = make_state(surface, mu_S, mode="dipole", bottom=bottom, bottom_density=mu_B)
    dz, dmu = dipole_rates(state, params, cache)
    print(f"max |dz/dt| = {np.max(np.abs(dz)):.3e}, max |dmu/dt| = {np.max(np.abs(dmu)):.3e}")
