"""Periodic kernels of the strip and the boundary sums built on them.

All kernels are functions of a complex separation x = x1 + i*x2 on a strip of
horizontal period L. Velocities are conjugated: u_hat = u1 - i*u2.
"""
import logging
from dataclasses import dataclass

import numpy as np

from core.errors import SingularKernelError
from core.geometry import Curve, periodic_derivative

logger = logging.getLogger(__name__)

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class KernelContext:
    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"Kernel period must be positive, got {self.L}")


def _phase(x, L: float):
    """Returns (sigma, q, |t|) with q = exp(i*sigma*2*pi*x/L), |q| <= 1."""
    w = 2.0 * np.pi * np.asarray(x, dtype=complex) / L
    sigma = np.where(w.imag < 0.0, -1.0, 1.0)
    q = np.exp(1j * sigma * w)
    return sigma, q, np.abs(w.imag)


def _check_off_lattice(x, L: float) -> None:
    x = np.asarray(x, dtype=complex)
    r = x.real / L
    on = (x.imag == 0.0) & (r == np.round(r))
    if np.any(on):
        bad = x.ravel()[np.flatnonzero(on.ravel())[0]]
        raise SingularKernelError(f"Kernel evaluated on the lattice point {bad} (period {L})")


def _cot_raw(x, L: float):
    sigma, q, _ = _phase(x, L)
    return -sigma * (1.0 + q) / (2.0 * L * (1.0 - q))


def _sin2_raw(x, L: float):
    _, q, _ = _phase(x, L)
    return 2j * np.pi * q / (L**2 * (1.0 - q) ** 2)


def _log_raw(x, L: float):
    _, q, abs_t = _phase(x, L)
    return abs_t - LN2 + np.log(np.abs(1.0 - q) ** 2)


def _as_output(value, x):
    return value if np.ndim(x) else value.item()


def green(ctx: KernelContext, x):
    """
    Periodic Green function (1/4pi) ln(cosh(2 pi x2/L) - cos(2 pi x1/L)).

    Args:
        ctx (KernelContext): strip period.
        x (complex | np.ndarray): separation(s).

    Returns:
        float | np.ndarray: G(x).

    Raises:
        SingularKernelError: if any x lies on the lattice {kL}.
    """
    _check_off_lattice(x, ctx.L)
    return _as_output(_log_raw(x, ctx.L) / (4.0 * np.pi), x)


def log_kernel(ctx: KernelContext, x):
    """ln(cosh(2 pi x2/L) - cos(2 pi x1/L)) = 4 pi G(x)."""
    _check_off_lattice(x, ctx.L)
    return _as_output(_log_raw(x, ctx.L), x)


def cot_kernel(ctx: KernelContext, x):
    """
    Conjugated Biot-Savart kernel (1/(2 L i)) cot(pi x/L).

    Tends to -1/(2L) as x2 -> +inf and +1/(2L) as x2 -> -inf. Evaluated from
    q = exp(+-2 i pi x/L) so large |x2| never overflows.
    """
    _check_off_lattice(x, ctx.L)
    return _as_output(_cot_raw(x, ctx.L), x)


def sin2_kernel(ctx: KernelContext, x):
    """(pi/(2 L^2 i)) sin^-2(pi x/L), the negated complex derivative of cot_kernel."""
    _check_off_lattice(x, ctx.L)
    return _as_output(_sin2_raw(x, ctx.L), x)


def _pairwise(targets, sources) -> np.ndarray:
    return np.asarray(targets, dtype=complex)[:, None] - np.asarray(sources, dtype=complex)[None, :]


def _matrix(raw, ctx: KernelContext, targets, sources, skip_diagonal: bool):
    diff = _pairwise(targets, sources)
    if not skip_diagonal:
        _check_off_lattice(diff, ctx.L)
        return raw(diff, ctx.L)
    mask = np.eye(diff.shape[0], diff.shape[1], dtype=bool)
    safe = np.where(mask, 0.5 * ctx.L, diff)
    _check_off_lattice(safe, ctx.L)
    out = raw(safe, ctx.L)
    out[mask] = 0.0
    return out


def cot_matrix(ctx: KernelContext, targets, sources, skip_diagonal: bool = False) -> np.ndarray:
    """K(t_i - s_j) for every target/source pair; the diagonal is zeroed when skipped."""
    return _matrix(_cot_raw, ctx, targets, sources, skip_diagonal)


def sin2_matrix(ctx: KernelContext, targets, sources, skip_diagonal: bool = False) -> np.ndarray:
    return _matrix(_sin2_raw, ctx, targets, sources, skip_diagonal)


def log_matrix(ctx: KernelContext, targets, sources, skip_diagonal: bool = False) -> np.ndarray:
    return _matrix(_log_raw, ctx, targets, sources, skip_diagonal)


def desingularized_pv(ctx: KernelContext, sources: Curve, f, targets, target_d1, target_f) -> np.ndarray:
    """
    Principal value of de*sum_j K(t - z_j) f_j at targets lying on the source curve
    but not on its nodes (typically the dual grid).

    The sum is taken in the subtracted form
        de * sum_j K(t_i - z_j) (f_j t_e,i - f(t_i) z_e,j) / t_e,i,
    so the 1/(t - z) singularity cancels and only the smooth part is summed.

    Args:
        ctx (KernelContext): strip period.
        sources (Curve): curve carrying the density.
        f (np.ndarray): density at the source nodes.
        targets (np.ndarray): target points on the curve.
        target_d1 (np.ndarray): z_e at the targets.
        target_f (np.ndarray): density at the targets.

    Returns:
        np.ndarray: complex principal values at the targets.
    """
    K = cot_matrix(ctx, targets, sources.points)
    de = sources.param_step
    return de * (K @ np.asarray(f, dtype=complex)
                 - np.asarray(target_f) / np.asarray(target_d1) * (K @ sources.d1))


def desingularized_sums(ctx: KernelContext, c: Curve, f) -> np.ndarray:
    """Node-collocated principal values for every node of c.

    The j = i term is replaced by its continuous limit
    -(f_e z_e - f z_ee) / (2 pi i z_e^2), which keeps the punctured sum second order.
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != (c.n_points,):
        raise ValueError(f"density has shape {f.shape}, expected ({c.n_points},)")
    K = cot_matrix(ctx, c.points, c.points, skip_diagonal=True)
    de = c.param_step
    off = K @ f - f / c.d1 * (K @ c.d1)
    f_e = periodic_derivative(f, de)
    diag = -(f_e * c.d1 - f * c.d2) / (2j * np.pi * c.d1**2)
    return de * (off + diag)


def desingularized_sum(ctx: KernelContext, c: Curve, f, i: int) -> complex:
    if not -c.n_points <= i < c.n_points:
        raise IndexError(f"node index {i} out of range for {c.n_points} nodes")
    return complex(desingularized_sums(ctx, c, f)[i])


def plemelj_limits(ctx: KernelContext, c: Curve, f, side: str) -> np.ndarray:
    """One-sided limits of the sheet velocity at every node; 'below' is the fluid side of a surface."""
    if side not in ("above", "below"):
        raise ValueError(f"side must be 'above' or 'below', got {side!r}")
    pv = desingularized_sums(ctx, c, f)
    jump = 0.5 * np.asarray(f) / c.d1
    return pv - jump if side == "above" else pv + jump


def plemelj_limit(ctx: KernelContext, c: Curve, f, i: int, side: str) -> complex:
    if not -c.n_points <= i < c.n_points:
        raise IndexError(f"node index {i} out of range for {c.n_points} nodes")
    return complex(plemelj_limits(ctx, c, f, side)[i])


def sheet_velocity(ctx: KernelContext, c: Curve, gamma, x) -> np.ndarray:
    """Off-sheet velocity de * sum_j gamma_j K(x - z_j) of one sheet."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    return c.param_step * (cot_matrix(ctx, x, c.points) @ np.asarray(gamma, dtype=complex))


def vortex_velocity(ctx: KernelContext, vortex_z, strengths, x, skip_self: bool = False) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    if np.size(vortex_z) == 0:
        return np.zeros(x.shape, dtype=complex)
    K = cot_matrix(ctx, x, vortex_z, skip_diagonal=skip_self)
    return K @ np.asarray(strengths, dtype=complex)


def vorticity_velocity(ctx: KernelContext, surface: Curve, bottom: Curve | None, omega0: float, x) -> np.ndarray:
    """Velocity of a uniform vorticity omega0 filling the fluid, as boundary log integrals.

    For flat boundaries at 0 and -h0 this is the shear -omega0 (Im x + h0/2).
    """
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    if omega0 == 0.0:
        return np.zeros(x.shape, dtype=complex)
    total = surface.param_step * (log_matrix(ctx, x, surface.points) @ np.conj(surface.d1))
    if bottom is not None:
        total = total - bottom.param_step * (log_matrix(ctx, x, bottom.points) @ np.conj(bottom.d1))
    return omega0 / (4.0 * np.pi) * total


def vorticity_velocity_rate(ctx: KernelContext, surface: Curve, dt_surface, dt_surface_e,
                            bottom: Curve | None, omega0: float, x, dt_x) -> np.ndarray:
    """Time derivative of vorticity_velocity for moving targets and a moving surface.

    Uses d/dt ln-kernel(w) = -4 pi Im[K(w) dw/dt].
    """
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    if omega0 == 0.0:
        return np.zeros(x.shape, dtype=complex)
    dt_x = np.atleast_1d(np.asarray(dt_x, dtype=complex))
    K = cot_matrix(ctx, x, surface.points)
    dw = dt_x[:, None] - np.asarray(dt_surface)[None, :]
    dlog = -4.0 * np.pi * np.imag(K * dw)
    total = surface.param_step * (dlog @ np.conj(surface.d1)
                                  + log_matrix(ctx, x, surface.points) @ np.conj(dt_surface_e))
    if bottom is not None:
        Kb = cot_matrix(ctx, x, bottom.points)
        dlog_b = -4.0 * np.pi * np.imag(Kb * dt_x[:, None])
        total = total - bottom.param_step * (dlog_b @ np.conj(bottom.d1))
    return omega0 / (4.0 * np.pi) * total


def _periodic_log_weights(n: int, param_length: float) -> np.ndarray:
    """Fourier multipliers of f -> int ln(4 sin^2(pi (e - e')/L_e)) f(e') de'."""
    k = np.abs(np.fft.fftfreq(n) * n)
    k[0] = np.inf
    return -param_length / k


def log_sum_on_curve(ctx: KernelContext, c: Curve, f) -> np.ndarray:
    """
    de * sum_j f_j ln(cosh(2 pi y_ij/L) - cos(2 pi x_ij/L)) with targets on the nodes of c.

    The logarithmic singularity is split off as ln(4 sin^2(pi (e_i - e_j)/L_e)) and
    integrated exactly on trigonometric polynomials by FFT; the smooth remainder
    uses the trapezoid rule with its diagonal limit ln(|z_e|^2 L_e^2 / (2 L^2)).

    Args:
        ctx (KernelContext): strip period.
        c (Curve): source and target curve.
        f (np.ndarray): real or complex density at the nodes.

    Returns:
        np.ndarray: the sums at every node (complex when f is).
    """
    f = np.asarray(f)
    n = c.n_points
    if f.shape != (n,):
        raise ValueError(f"density has shape {f.shape}, expected ({n},)")
    offsets = np.subtract.outer(np.arange(n), np.arange(n))
    split = 4.0 * np.sin(np.pi * offsets / n) ** 2
    np.fill_diagonal(split, 1.0)
    smooth = log_matrix(ctx, c.points, c.points, skip_diagonal=True) - np.log(split)
    np.fill_diagonal(smooth, np.log(0.5 * c.speed**2 * c.param_length**2 / ctx.L**2))
    singular = np.fft.ifft(np.fft.fft(f) * _periodic_log_weights(n, c.param_length))
    total = c.param_step * (smooth @ f) + (singular if np.iscomplexobj(f) else singular.real)
    return total


def sheet_stream(ctx: KernelContext, c: Curve, gamma, x) -> np.ndarray:
    """Stream function de * sum_j gamma_j G(x - z_j) of one vortex sheet at points off it."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    return c.param_step * (log_matrix(ctx, x, c.points) @ np.asarray(gamma, dtype=float)) / (4.0 * np.pi)


def sheet_stream_on_curve(ctx: KernelContext, c: Curve, gamma) -> np.ndarray:
    """Stream function of a vortex sheet at its own nodes (continuous across the sheet)."""
    return log_sum_on_curve(ctx, c, np.asarray(gamma, dtype=float)) / (4.0 * np.pi)


def dipole_potential(ctx: KernelContext, c: Curve, mu, x) -> np.ndarray:
    """Potential de * sum_j mu_j Re[K(x - z_j) z_e,j] of a dipole layer at points off it."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    K = cot_matrix(ctx, x, c.points)
    return c.param_step * (np.real(K * c.d1[None, :]) @ np.asarray(mu, dtype=float))


def dipole_stream(ctx: KernelContext, c: Curve, mu, x) -> np.ndarray:
    """Harmonic conjugate -de * sum_j mu_j Im[K(x - z_j) z_e,j] at points off the layer."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    K = cot_matrix(ctx, x, c.points)
    return -c.param_step * (np.imag(K * c.d1[None, :]) @ np.asarray(mu, dtype=float))


def dipole_stream_on_curve(ctx: KernelContext, c: Curve, mu) -> np.ndarray:
    """
    Conjugate of a dipole layer at its own nodes, where it is continuous.

    Uses the subtracted density mu_j - mu_i; the principal value of
    sum_j K(z_i - z_j) z_e,j vanishes and the j = i limit contributes mu_e/(2 pi).
    """
    mu = np.asarray(mu, dtype=float)
    K = cot_matrix(ctx, c.points, c.points, skip_diagonal=True)
    diff = mu[None, :] - mu[:, None]
    off = np.sum(diff * np.imag(K * c.d1[None, :]), axis=1)
    mu_e = periodic_derivative(mu, c.param_step)
    return -c.param_step * (off + mu_e / (2.0 * np.pi))


def sheet_densities(state) -> tuple[np.ndarray, np.ndarray]:
    """Vortex-sheet densities of a state: gamma itself, or d(mu)/de in dipole mode."""
    if state.mode == "dipole":
        gs = periodic_derivative(state.density, state.surface.param_step)
        gb = (periodic_derivative(state.bottom_values, state.bottom.param_step)
              if state.bottom is not None else np.zeros(0))
        return gs, gb
    return np.asarray(state.density, dtype=float), state.bottom_values


def field_velocity(ctx: KernelContext, state, x, omega0: float = 0.0):
    """
    Conjugated velocity at points strictly inside the fluid or the air.

    Sums the surface sheet, the bottom sheet, the point vortices and the uniform
    vorticity. Points on a sheet must go through plemelj_limit instead.

    Args:
        ctx (KernelContext): strip period.
        state (SheetState): current densities and geometry.
        x (complex | np.ndarray): evaluation point(s).
        omega0 (float): uniform vorticity of the fluid.

    Returns:
        complex | np.ndarray: u1 - i u2 at x.
    """
    pts = np.atleast_1d(np.asarray(x, dtype=complex))
    gs, gb = sheet_densities(state)
    u = sheet_velocity(ctx, state.surface, gs, pts)
    if state.bottom is not None:
        u = u + sheet_velocity(ctx, state.bottom, gb, pts)
    u = u + vortex_velocity(ctx, state.vortex_z, state.vortex_strength, pts)
    u = u + vorticity_velocity(ctx, state.surface, state.bottom, omega0, pts)
    return u if np.ndim(x) else complex(u[0])


if __name__ == '__main__':
    ctx = KernelContext(L=2 * np.pi)
    print(f"green(L/2) = {green(ctx, np.pi):.6f} (expected {LN2 / (4 * np.pi):.6f})")
    print(f"cot_kernel(10i L) = {cot_kernel(ctx, 20j * np.pi)}")
