"""Regularized baselines: a spectral low-pass filter and the curve-offset sheet."""
import logging

import numpy as np

from core.config import FilterSpec, OffsetSpec
from core.geometry import Curve, normals
from core.kernels import (KernelContext, cot_matrix, sheet_velocity, sin2_matrix, vortex_velocity,
                          vorticity_velocity)
from core.operators import DenseOperator

logger = logging.getLogger(__name__)


def filter_symbol(n: int, spec: FilterSpec) -> np.ndarray:
    """F(k) = 1/2 - 1/2 tanh((2|k|pi/N - xi0)/d) for the FFT ordering of n samples."""
    k = np.abs(np.fft.fftfreq(n) * n)
    return 0.5 - 0.5 * np.tanh((2.0 * k * np.pi / n - spec.xi0) / spec.d)


def fourier_filter(values, spec: FilterSpec) -> np.ndarray:
    """
    Low-pass filters a periodic sequence mode by mode.

    Args:
        values (np.ndarray): periodic real or complex samples; N must be even.
        spec (FilterSpec): cut-off centre and width.

    Returns:
        np.ndarray: filtered samples, real when the input is real.
    """
    v = np.asarray(values)
    if v.size % 2:
        raise ValueError(f"Fourier filter needs an even number of samples, got {v.size}")
    out = np.fft.ifft(np.fft.fft(v) * filter_symbol(v.size, spec))
    return out.real if not np.iscomplexobj(v) else out


def filter_curve_points(c: Curve, spec: FilterSpec) -> np.ndarray:
    """Filters the periodic part z - (L/L_e)(e - e0) of a curve and restores the drift."""
    drift = c.horizontal_period / c.param_length * (c.params - c.e0)
    return fourier_filter(c.points - drift, spec) + drift


def offset_reach(c: Curve, spec: OffsetSpec) -> float:
    """Signed source displacement along n: L_d - eps_N L/pi, with L_d = delta L/N and eps_N = eps_factor/N.

    Adding eps_N n_j inside cot(pi (x - X_j)/L + eps_N n_j) is the same as moving
    the source X_j by -eps_N L n_j / pi.
    """
    n = c.n_points
    L = c.horizontal_period
    return spec.delta * L / n - spec.eps_factor / n * L / np.pi


def offset_shift(c: Curve, spec: OffsetSpec) -> np.ndarray:
    return offset_reach(c, spec) * normals(c)


def offset_sources(c: Curve, spec: OffsetSpec) -> np.ndarray:
    return c.points + offset_shift(c, spec)


def offset_velocity(state, spec: OffsetSpec, x, omega0: float = 0.0,
                    ctx: KernelContext | None = None):
    """
    Field velocity with the surface sheet carried by displaced sources.

    Args:
        state (SheetState): vortex-mode state.
        spec (OffsetSpec): offset and blob parameters.
        x (complex | np.ndarray): evaluation point(s).
        omega0 (float): uniform vorticity.
        ctx (KernelContext, optional): strip period.

    Returns:
        complex | np.ndarray: u_hat at x.
    """
    ctx = ctx or KernelContext(state.surface.horizontal_period)
    pts = np.atleast_1d(np.asarray(x, dtype=complex))
    s = state.surface
    K = cot_matrix(ctx, pts, offset_sources(s, spec))
    u = s.param_step * (K @ np.asarray(state.density, dtype=complex))
    if state.bottom is not None:
        u = u + sheet_velocity(ctx, state.bottom, state.bottom_values, pts)
    u = u + vortex_velocity(ctx, state.vortex_z, state.vortex_strength, pts)
    u = u + vorticity_velocity(ctx, s, state.bottom, omega0, pts)
    return u if np.ndim(x) else complex(u[0])


def offset_self_velocity(ctx: KernelContext, c: Curve, gamma, targets, target_d1, target_gamma,
                         spec: OffsetSpec) -> np.ndarray:
    """Mean of the two sheet traces when the fluid-side trace is the smooth offset field."""
    K = cot_matrix(ctx, targets, offset_sources(c, spec))
    u_fluid = c.param_step * (K @ np.asarray(gamma, dtype=complex))
    return u_fluid - 0.5 * np.asarray(target_gamma) / np.asarray(target_d1)


def _normal_rate(c: Curve, dt_z_e: np.ndarray) -> np.ndarray:
    speed = c.speed
    return 1j * (dt_z_e / speed - c.d1 * np.real(np.conj(c.d1) * dt_z_e) / speed**3)


def offset_self_rate(ctx: KernelContext, c: Curve, gamma, targets, target_d1, dt_targets,
                     dt_target_d1, dt_z, dt_z_e, spec: OffsetSpec) -> np.ndarray:
    """Rate of Re[t_e u_mean] at frozen density for the offset self term."""
    Y = offset_sources(c, spec)
    dt_Y = np.asarray(dt_z) + offset_reach(c, spec) * _normal_rate(c, np.asarray(dt_z_e))
    K = cot_matrix(ctx, targets, Y)
    S = sin2_matrix(ctx, targets, Y)
    g = np.asarray(gamma, dtype=complex)
    u = c.param_step * (K @ g)
    rel = np.asarray(dt_targets)[:, None] - dt_Y[None, :]
    du = -c.param_step * np.sum(S * rel * g[None, :], axis=1)
    return np.real(np.asarray(dt_target_d1) * u + np.asarray(target_d1) * du)


def assemble_AS_offset(ctx: KernelContext, c: Curve, A_tw: float, spec: OffsetSpec) -> DenseOperator:
    """Density operator of the offset model: A de Re[K(z_i - Y_j) z_e,i] plus (1 - A)/2 on the diagonal."""
    K = cot_matrix(ctx, c.points, offset_sources(c, spec))
    M = A_tw * c.param_step * np.real(K * c.d1[:, None])
    M[np.diag_indices_from(M)] += 0.5 * (1.0 - A_tw)
    return DenseOperator(M)


if __name__ == '__main__':
    N = 64
    x = 2 * np.pi * np.arange(N) / N
    noisy = np.cos(x) + 0.1 * (-1.0) ** np.arange(N)
    clean = fourier_filter(noisy, FilterSpec())
    print(f"max deviation from cos after filtering: {np.max(np.abs(clean - np.cos(x))):.2e}")
