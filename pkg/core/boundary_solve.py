import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from core.errors import CompatibilityError, ConfigurationError, NeumannDivergenceError
from core.geometry import Curve, dual_curve, enclosed_area, normal_component, to_dual
from core.kernels import (KernelContext, _log_raw, cot_matrix, green, plemelj_limits, sheet_stream_on_curve,
                          sheet_velocity, vortex_velocity, vorticity_velocity)
from core.operators import (OperatorCache, assemble_AstarB, assemble_BB, build_operator_cache,
                            dense_solve, factorize_BB, neumann_solve)
from core.state import make_state

logger = logging.getLogger(__name__)

BackgroundKind = Literal["zero", "uniform_gamma_flat", "harmonic_H", "mirror_flat_bottom"]

COMPATIBILITY_TOL = 1e-10


@dataclass(frozen=True)
class BackgroundField:
    """Stationary field u_{omega,gamma} carried alongside the dipole layers."""
    kind: BackgroundKind
    L: float
    gamma: float = 0.0
    bottom: Curve | None = None
    gamma_BH: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h0: float = 1.0
    omega0: float = 0.0
    vortex_z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    vortex_strength: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.kind == "harmonic_H":
            if self.bottom is None or self.gamma_BH.shape != (self.bottom.n_points,):
                raise ConfigurationError("harmonic_H background needs a bottom and its density")
        if self.kind != "mirror_flat_bottom" and (self.omega0 != 0.0 or self.vortex_z.size):
            raise ConfigurationError(f"background '{self.kind}' cannot carry vorticity")

    @property
    def ctx(self) -> KernelContext:
        return KernelContext(self.L)


def zero_background(L: float) -> BackgroundField:
    return BackgroundField(kind="zero", L=L)


def check_compatibility(surface: Curve, g_normal) -> None:
    """Rejects normal data whose flux through the surface does not vanish.

    Raises:
        CompatibilityError: if |de sum g |z_e|| exceeds the tolerance.
    """
    g_normal = np.asarray(g_normal, dtype=float)
    flux = surface.param_step * float(np.sum(g_normal * surface.speed))
    scale = max(1.0, float(np.max(np.abs(g_normal))) if g_normal.size else 0.0) * surface.horizontal_period
    if abs(flux) > COMPATIBILITY_TOL * scale:
        raise CompatibilityError(f"normal velocity carries a net flux {flux:.3e} through the surface")


def project_compatible(surface: Curve, g_normal) -> np.ndarray:
    """Subtracts the |z_e|-weighted mean so the discrete flux vanishes."""
    g_normal = np.asarray(g_normal, dtype=float)
    w = surface.speed
    return g_normal - np.sum(g_normal * w) / np.sum(w)


def _stacked_system(ctx: KernelContext, surface: Curve, bottom: Curve | None):
    """Normal-trace rows at the dual nodes of both curves; the last row of each block is left for circulation."""
    s_dual = dual_curve(surface)
    n_s = surface.n_points
    K_ss = cot_matrix(ctx, s_dual.points, surface.points)
    rows_ss = surface.param_step * np.imag(s_dual.d1[:, None] * K_ss)
    if bottom is None:
        M = rows_ss
        M[n_s - 1] = surface.param_step
        return M, s_dual, None
    b_dual = dual_curve(bottom)
    n_b = bottom.n_points
    K_sb = cot_matrix(ctx, s_dual.points, bottom.points)
    K_bs = cot_matrix(ctx, b_dual.points, surface.points)
    K_bb = cot_matrix(ctx, b_dual.points, bottom.points)
    M = np.zeros((n_s + n_b, n_s + n_b))
    M[:n_s, :n_s] = rows_ss
    M[:n_s, n_s:] = bottom.param_step * np.imag(s_dual.d1[:, None] * K_sb)
    M[n_s:, :n_s] = surface.param_step * np.imag(b_dual.d1[:, None] * K_bs)
    M[n_s:, n_s:] = bottom.param_step * np.imag(b_dual.d1[:, None] * K_bb)
    M[n_s - 1] = 0.0
    M[n_s - 1, :n_s] = surface.param_step
    M[-1] = 0.0
    M[-1, n_s:] = bottom.param_step
    return M, s_dual, b_dual


def solve_initial_gammaS(surface: Curve, bottom: Curve | None, g_normal, gamma: float = 0.0,
                         omega0: float = 0.0, vortex_z=None, vortex_strength=None,
                         ctx: KernelContext | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Vortex-sheet densities reproducing a prescribed surface normal velocity.

    The surface and bottom normal traces are collocated at the dual nodes; the
    last row of each block is replaced by its circulation constraint
    de_S sum gamma_S = gamma - omega0 |D_F| - sum gamma_v and de_B sum gamma_B = -gamma.

    Args:
        surface (Curve): free surface.
        bottom (Curve | None): bottom, or None in deep water.
        g_normal (np.ndarray): u.n at the surface nodes.
        gamma (float): circulation along the bottom.
        omega0 (float): uniform vorticity.
        vortex_z, vortex_strength: point vortices.
        ctx (KernelContext, optional): strip period.

    Returns:
        tuple[np.ndarray, np.ndarray]: (gamma_S, gamma_B); gamma_B is empty in deep water.

    Raises:
        CompatibilityError: if g_normal has a net flux.
        ConfigurationError: if omega0 is set without a bottom.
        FactorizationError: if the stacked system is singular.
    """
    ctx = ctx or KernelContext(surface.horizontal_period)
    check_compatibility(surface, g_normal)
    if bottom is None and omega0 != 0.0:
        raise ConfigurationError("uniform vorticity needs a bottom to bound the fluid")
    vz = np.zeros(0, dtype=complex) if vortex_z is None else np.asarray(vortex_z, dtype=complex)
    vs = np.zeros(0) if vortex_strength is None else np.asarray(vortex_strength, dtype=float)

    M, s_dual, b_dual = _stacked_system(ctx, surface, bottom)
    n_s = surface.n_points
    g_dual = to_dual(np.asarray(g_normal, dtype=float))
    u_known = (vortex_velocity(ctx, vz, vs, s_dual.points)
               + vorticity_velocity(ctx, surface, bottom, omega0, s_dual.points))
    rhs_s = -g_dual * s_dual.speed - np.imag(s_dual.d1 * u_known)
    area = enclosed_area(surface, bottom) if omega0 != 0.0 else 0.0
    rhs_s[n_s - 1] = gamma - omega0 * area - vs.sum()
    if bottom is None:
        return dense_solve(M, rhs_s), np.zeros(0)

    u_known_b = (vortex_velocity(ctx, vz, vs, b_dual.points)
                 + vorticity_velocity(ctx, surface, bottom, omega0, b_dual.points))
    rhs_b = -np.imag(b_dual.d1 * u_known_b)
    rhs_b[-1] = -gamma
    sol = dense_solve(M, np.concatenate([rhs_s, rhs_b]))
    return sol[:n_s], sol[n_s:]


def solve_gamma_B(state, cache: OperatorCache, gamma: float = 0.0, omega0: float = 0.0) -> np.ndarray:
    """
    Bottom vortex-sheet density cancelling the bottom normal velocity.

    Uses the LU factors of B_B held by the cache; returns an empty array in deep water.
    """
    if cache.deep_water:
        return np.zeros(0)
    ctx = cache.ctx
    b_dual = cache.bottom_dual
    n_b = cache.bottom.n_points
    targets = b_dual.points[: n_b - 1]
    u = (sheet_velocity(ctx, state.surface, state.density, targets)
         + vortex_velocity(ctx, state.vortex_z, state.vortex_strength, targets)
         + vorticity_velocity(ctx, state.surface, cache.bottom, omega0, targets))
    rhs = np.empty(n_b)
    rhs[: n_b - 1] = -np.imag(b_dual.d1[: n_b - 1] * u)
    rhs[-1] = -gamma
    return cache.solve_BB(rhs)


def mu_B_rhs(surface: Curve, mu_S, bottom: Curve, ctx: KernelContext) -> np.ndarray:
    """-de_S sum_j mu_S(j) Re[K(z_B(i) - z_S(j)) z_S,e(j)]."""
    K = cot_matrix(ctx, bottom.points, surface.points)
    return -surface.param_step * (np.real(K * surface.d1[None, :]) @ np.asarray(mu_S, dtype=float))


def solve_mu_B(state, cache: OperatorCache) -> np.ndarray:
    """
    Bottom dipole density making the potential vanish below the bottom.

    Uses the cached inverse of A*_B when present, else a Neumann solve.
    """
    if cache.deep_water:
        return np.zeros(0)
    rhs = mu_B_rhs(state.surface, state.density, cache.bottom, cache.ctx)
    if cache.AstarB_inv is not None:
        return cache.AstarB_inv @ rhs
    mu_B, report = neumann_solve(assemble_AstarB(cache.bottom, cache.ctx), rhs)
    if not report.converged:
        raise NeumannDivergenceError("bottom dipole solve did not converge", trace=report.trace)
    return mu_B


def mu_from_gamma(gamma_tilde, de: float) -> np.ndarray:
    """Zero-mean periodic antiderivative of gamma_tilde by the trapezoid rule."""
    g = np.asarray(gamma_tilde, dtype=float)
    increments = 0.5 * de * (g + np.roll(g, 1))
    increments[0] = 0.0
    mu = np.cumsum(increments)
    return mu - mu.mean()


def solve_initial_muS(surface: Curve, bottom: Curve | None, g_normal, background: BackgroundField,
                      cache: OperatorCache | None = None,
                      ctx: KernelContext | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Initial dipole densities for the part of the flow not carried by the background.

    Solves the stacked sheet system with zero circulations against the normal
    data minus the background's normal trace, then integrates the surface
    sheet into mu_S0 with zero mean and solves mu_B0 from it.

    Returns:
        tuple[np.ndarray, np.ndarray]: (mu_S0, mu_B0).
    """
    ctx = ctx or KernelContext(surface.horizontal_period)
    g_total = np.asarray(g_normal, dtype=float)
    g_tilde = g_total - normal_component(background_velocity(background, surface.points), surface.d1)
    check_compatibility(surface, g_tilde)
    gamma_S, _ = solve_initial_gammaS(surface, bottom, g_tilde, 0.0, 0.0, ctx=ctx)
    mu_S = mu_from_gamma(gamma_S, surface.param_step)
    if bottom is None:
        return mu_S, np.zeros(0)
    cache = cache or _dipole_cache(ctx, bottom)
    mu_B = solve_mu_B(make_state(surface, mu_S, mode="dipole", bottom=bottom), cache)
    return mu_S, mu_B


def _dipole_cache(ctx: KernelContext, bottom: Curve) -> OperatorCache:
    return build_operator_cache(ctx, bottom, "dipole")


def build_background(kind: BackgroundKind, L: float, gamma: float = 0.0, bottom: Curve | None = None,
                     cache: OperatorCache | None = None, h0: float = 1.0, omega0: float = 0.0,
                     vortex_z=None, vortex_strength=None) -> BackgroundField:
    """
    Constructs one of the stationary background fields.

    harmonic_H solves B_B gamma_BH = (0, ..., 0, -2 gamma), a bottom sheet with
    no normal flux whose fluid-side circulation is gamma.
    """
    vz = np.zeros(0, dtype=complex) if vortex_z is None else np.asarray(vortex_z, dtype=complex)
    vs = np.zeros(0) if vortex_strength is None else np.asarray(vortex_strength, dtype=float)
    if kind == "harmonic_H":
        if bottom is None:
            raise ConfigurationError("harmonic_H background needs a bottom")
        if cache is None or cache.BB_lu is None:
            ctx = KernelContext(L)
            b_dual = dual_curve(bottom)
            cache = OperatorCache(ctx=ctx, bottom=bottom, bottom_dual=b_dual,
                                  BB_lu=factorize_BB(assemble_BB(bottom, b_dual, ctx)))
        rhs = np.zeros(bottom.n_points)
        rhs[-1] = -2.0 * gamma
        return BackgroundField(kind=kind, L=L, gamma=gamma, bottom=bottom, gamma_BH=cache.solve_BB(rhs))
    if kind == "mirror_flat_bottom":
        if bottom is not None and np.ptp(bottom.points.imag) > 1e-12 * L:
            raise ConfigurationError("mirror_flat_bottom needs a flat bottom")
        return BackgroundField(kind=kind, L=L, gamma=gamma, h0=h0, omega0=omega0,
                               vortex_z=vz, vortex_strength=vs)
    return BackgroundField(kind=kind, L=L, gamma=gamma if kind == "uniform_gamma_flat" else 0.0)


def _mirror_images(bg: BackgroundField) -> np.ndarray:
    return np.conj(bg.vortex_z) - 2j * bg.h0


def background_velocity(bg: BackgroundField, x):
    """
    Conjugated velocity of the background field.

    Args:
        bg (BackgroundField): the field.
        x (complex | np.ndarray): evaluation point(s) off the sheets and images.

    Returns:
        complex | np.ndarray: u_hat at x.
    """
    pts = np.atleast_1d(np.asarray(x, dtype=complex))
    ctx = bg.ctx
    if bg.kind == "zero":
        u = np.zeros(pts.shape, dtype=complex)
    elif bg.kind == "uniform_gamma_flat":
        u = np.full(pts.shape, bg.gamma / bg.L, dtype=complex)
    elif bg.kind == "harmonic_H":
        u = sheet_velocity(ctx, bg.bottom, bg.gamma_BH, pts)
    elif bg.kind == "mirror_flat_bottom":
        u = np.full(pts.shape, bg.gamma / bg.L, dtype=complex)
        u = u + vortex_velocity(ctx, bg.vortex_z, bg.vortex_strength, pts)
        u = u - vortex_velocity(ctx, _mirror_images(bg), bg.vortex_strength, pts)
        u = u - bg.omega0 * (pts.imag + bg.h0)
    else:
        raise ConfigurationError(f"unknown background kind {bg.kind!r}")
    return u if np.ndim(x) else complex(u[0])


def background_stream(bg: BackgroundField, x) -> np.ndarray:
    """Stream function psi of the background, with u = (-d_y psi, d_x psi)."""
    pts = np.atleast_1d(np.asarray(x, dtype=complex))
    ctx = bg.ctx
    if bg.kind == "zero":
        return np.zeros(pts.shape)
    if bg.kind == "uniform_gamma_flat":
        return -bg.gamma * pts.imag / bg.L
    if bg.kind == "harmonic_H":
        diff = pts[:, None] - bg.bottom.points[None, :]
        return bg.bottom.param_step * (green(ctx, diff) @ bg.gamma_BH)
    psi = -bg.gamma * pts.imag / bg.L + 0.5 * bg.omega0 * (pts.imag + bg.h0) ** 2
    if bg.vortex_z.size:
        direct = _log_raw(pts[:, None] - bg.vortex_z[None, :], bg.L)
        image = _log_raw(pts[:, None] - _mirror_images(bg)[None, :], bg.L)
        psi = psi + (direct - image) @ bg.vortex_strength / (4.0 * np.pi)
    return psi


def background_on_bottom(bg: BackgroundField, bottom: Curve) -> tuple[np.ndarray, np.ndarray]:
    """(u_hat, psi) of the background on the bottom nodes, taking the fluid-side trace of a bottom sheet."""
    if bg.kind == "harmonic_H":
        ctx = bg.ctx
        u = plemelj_limits(ctx, bg.bottom, bg.gamma_BH, "above")
        return u, sheet_stream_on_curve(ctx, bg.bottom, bg.gamma_BH)
    return np.atleast_1d(background_velocity(bg, bottom.points)), background_stream(bg, bottom.points)


if __name__ == '__main__':
    from core.geometry import flat_curve
    L, N = 2 * np.pi, 64
    surface = flat_curve(N, L)
    bottom = flat_curve(N, L, height=-1.0)
    gs, gb = solve_initial_gammaS(surface, bottom, np.zeros(N), gamma=1.0)
    print(f"gamma_S mean {gs.mean():.6f} (1/L = {1 / L:.6f}), gamma_B mean {gb.mean():.6f}")
