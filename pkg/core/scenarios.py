"""Initial interfaces and normal velocities for the built-in test cases."""
import logging

import numpy as np

from core.boundary_solve import build_background, project_compatible, solve_initial_gammaS, solve_initial_muS
from core.config import RunConfig, ScenarioSpec
from core.errors import ConfigurationError
from core.geometry import Curve, flat_curve, graph_curve
from core.kernels import KernelContext
from core.operators import build_operator_cache
from core.specfun import CnoidalWave, cnoidal_wave, jacobi_cn, jacobi_sn
from core.state import PointVortex, make_state
from core.stepper import Dynamics

logger = logging.getLogger(__name__)


def _tanh_kh(spec: ScenarioSpec) -> float:
    return 1.0 if spec.deep_water else float(np.tanh(spec.k * spec.h0))


def _nodes(spec: ScenarioSpec) -> np.ndarray:
    return spec.L * np.arange(spec.n_surface) / spec.n_surface


def wave_frequency(spec: ScenarioSpec) -> float:
    """omega = sqrt(g k tanh(k h0)), with tanh -> 1 in deep water."""
    return float(np.sqrt(spec.g * spec.k * _tanh_kh(spec)))


def linear_wave_elevation(spec: ScenarioSpec, x, t: float = 0.0) -> np.ndarray:
    """Analytic first-order translate A cos(k x - omega t)."""
    return spec.A * np.cos(spec.k * np.asarray(x, dtype=float) - wave_frequency(spec) * t)


def linear_wave_ic(spec: ScenarioSpec) -> tuple[Curve, np.ndarray]:
    """
    First-order Stokes wave: eta = A cos kx, u.n = A sin kx sqrt(g k tanh k h0).

    Args:
        spec (ScenarioSpec): amplitude, wavenumber, depth, gravity and resolution.

    Returns:
        tuple[Curve, np.ndarray]: surface sampled uniformly in x and its compatible normal velocity.
    """
    x = _nodes(spec)
    surface = graph_curve(x, spec.A * np.cos(spec.k * x), spec.L)
    g_normal = spec.A * np.sin(spec.k * x) * wave_frequency(spec)
    return surface, project_compatible(surface, g_normal)


def _steep_normal_velocity(spec: ScenarioSpec, x: np.ndarray) -> np.ndarray:
    """A sin kx sqrt(g k T) (1 + k A cos kx / T) / sqrt(1 + k^2 A^2 sin^2 kx), T = tanh k h0."""
    kA = spec.k * spec.A
    T = _tanh_kh(spec)
    s, c = np.sin(spec.k * x), np.cos(spec.k * x)
    return spec.A * s * wave_frequency(spec) * (1.0 + kA * c / T) / np.sqrt(1.0 + kA**2 * s**2)


def stokes2_harmonic(spec: ScenarioSpec) -> float:
    """Amplitude k A^2 (3 - T^2) / (4 T^3) of the cos 2kx correction."""
    T = _tanh_kh(spec)
    return spec.k * spec.A**2 * (3.0 - T**2) / (4.0 * T**3)


def stokes2_ic(spec: ScenarioSpec) -> tuple[Curve, np.ndarray]:
    """Second-order Stokes wave with the full-normal velocity correction."""
    x = _nodes(spec)
    eta = spec.A * np.cos(spec.k * x) + stokes2_harmonic(spec) * np.cos(2.0 * spec.k * x)
    surface = graph_curve(x, eta, spec.L)
    return surface, project_compatible(surface, _steep_normal_velocity(spec, x))


def breaking_ic(spec: ScenarioSpec) -> tuple[Curve, np.ndarray]:
    """Large cosine wave (A = 1/2 in the reference case) with the full-normal linear velocity."""
    x = _nodes(spec)
    surface = graph_curve(x, spec.A * np.cos(spec.k * x), spec.L)
    return surface, project_compatible(surface, _steep_normal_velocity(spec, x))


def cnoidal_reference(spec: ScenarioSpec) -> CnoidalWave:
    """
    Cnoidal wave whose wavelength equals the strip period.

    Raises:
        ConfigurationError: in deep water, where the wave is not defined.
        NoRootError: if the elliptic parameter cannot be bracketed.
    """
    if spec.deep_water:
        raise ConfigurationError("the cnoidal wave needs a finite depth")
    return cnoidal_wave(spec.L, spec.A, spec.h0, spec.g)


def cnoidal_ic(spec: ScenarioSpec) -> tuple[Curve, np.ndarray]:
    """Cnoidal wave at t = 0 and the normal velocity -c eta_x / sqrt(1 + eta_x^2) of a steady translation."""
    wave = cnoidal_reference(spec)
    x = _nodes(spec)
    eta = wave.elevation(x)
    u = 2.0 * wave.K * x / wave.L
    m, m1 = wave.param.m, wave.param.m1
    sn = jacobi_sn(u, m, m1)
    cn = jacobi_cn(u, m, m1)
    dn = np.sqrt(1.0 - m * sn**2)
    eta_x = -2.0 * wave.A * cn * sn * dn * 2.0 * wave.K / wave.L
    surface = graph_curve(x, eta, spec.L)
    logger.debug("cnoidal wave: m1=%.3e, c=%.6f, period %.4f", m1, wave.c, wave.period)
    return surface, project_compatible(surface, -wave.c * eta_x / np.sqrt(1.0 + eta_x**2))


def flat_bottom(spec: ScenarioSpec) -> Curve | None:
    """Flat bottom at -h0, or None in deep water."""
    if spec.deep_water:
        return None
    return flat_curve(spec.bottom_points, spec.L, height=-spec.h0)


def scenario_ic(spec: ScenarioSpec) -> tuple[Curve, np.ndarray]:
    """Dispatches on spec.kind.

    Raises:
        ConfigurationError: for 'custom', whose curves must be supplied in code.
    """
    builders = {"linear_wave": linear_wave_ic, "stokes2": stokes2_ic,
                "cnoidal": cnoidal_ic, "breaking": breaking_ic}
    if spec.kind not in builders:
        raise ConfigurationError(f"scenario '{spec.kind}' has no built-in generator")
    return builders[spec.kind](spec)


def initial_state(cfg: RunConfig, surface: Curve | None = None, g_normal=None):
    """
    Initial state and dynamics of a run.

    Solves the surface density from the normal velocity: gamma_S in the vortex
    formulation, mu_S (with the background split off) in the dipole one.

    Args:
        cfg (RunConfig): validated run configuration.
        surface (Curve, optional): custom surface; built from cfg.scenario when missing.
        g_normal (np.ndarray, optional): normal velocity on a custom surface.

    Returns:
        tuple[SheetState, Dynamics]: the state at t = 0 and its right-hand sides.
    """
    spec, params = cfg.scenario, cfg.physics
    if surface is None:
        surface, g_normal = scenario_ic(spec)
    elif g_normal is None:
        raise ConfigurationError("a custom surface needs its normal velocity")
    bottom = flat_bottom(spec)
    ctx = KernelContext(spec.L)
    cache = build_operator_cache(ctx, bottom, spec.formulation)
    vortices = [PointVortex(complex(v.x, v.y), v.strength) for v in spec.vortices]
    vz = np.array([v.z for v in vortices], dtype=complex)
    vs = np.array([v.strength for v in vortices], dtype=float)

    if spec.formulation == "vortex":
        gamma_S, gamma_B = solve_initial_gammaS(surface, bottom, g_normal, params.gamma, params.omega0,
                                                vz, vs, ctx)
        state = make_state(surface, gamma_S, "vortex", bottom, vortices, gamma_B if bottom is not None else None)
        background = None
    else:
        background = build_background(cfg.background, spec.L, params.gamma, bottom, None, params.h0,
                                      params.omega0, vz, vs)
        mu_S, mu_B = solve_initial_muS(surface, bottom, g_normal, background, cache, ctx)
        state = make_state(surface, mu_S, "dipole", bottom, bottom_density=mu_B if bottom is not None else None)
    offset = cfg.offset if cfg.regularizer == "offset" else None
    dynamics = Dynamics(spec.formulation, params, cache, background, offset, cfg.step.oec_enabled)
    logger.info("initial state: %s, %s formulation, N=%d%s", spec.kind, spec.formulation, surface.n_points,
                ", deep water" if bottom is None else f", N_B={bottom.n_points}")
    return state, dynamics


if __name__ == '__main__':
    spec = ScenarioSpec(kind="stokes2", A=1e-2, L=2 * np.pi, h0=1.0, g=1.0, n_surface=64)
    surface, g_normal = stokes2_ic(spec)
    print(f"second harmonic {stokes2_harmonic(spec):.6e}, omega {wave_frequency(spec):.5f}")
    print(f"flux after projection: {surface.param_step * np.sum(g_normal * surface.speed):.2e}")
