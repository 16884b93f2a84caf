"""Discrete boundary operators and their inversion.

Matrices are assembled row-vectorized from target-minus-source difference
matrices. Near-identity operators (I - R)/2 are inverted by the Neumann
series; the bottom circulation system is LU-factorized once per run.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from core.errors import FactorizationError, NeumannDivergenceError
from core.geometry import Curve, dual_curve
from core.kernels import KernelContext, cot_matrix

logger = logging.getLogger(__name__)

NEUMANN_MAX_ITERS = 500
NEUMANN_REL_TOL = 1e-10
NORM_ESTIMATE_STEPS = 20
RANK_ONE_TOL = 1e-8
# A fixed point is divergent after this many consecutive growing increments
# once the increment has also grown DIVERGENCE_GROWTH times past its smallest value.
DIVERGENCE_PATIENCE = 10
DIVERGENCE_GROWTH = 1e3


@dataclass(frozen=True)
class DenseOperator:
    entries: np.ndarray

    def __post_init__(self):
        if self.entries.ndim != 2:
            raise ValueError(f"operator entries must be 2-D, got shape {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("operator contains non-finite entries")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def __matmul__(self, other):
        other = other.entries if isinstance(other, DenseOperator) else other
        return self.entries @ other


@dataclass
class NeumannSolveReport:
    iterations: int
    residual_bound: float
    converged: bool
    norm_estimate: float = float("nan")
    trace: list[float] = field(default_factory=list)


def estimate_norm(apply: Callable[[np.ndarray], np.ndarray], n: int,
                  apply_transpose: Callable[[np.ndarray], np.ndarray] | None = None,
                  steps: int = NORM_ESTIMATE_STEPS) -> float:
    """
    Power-iteration estimate of the spectral norm of a linear map.

    Args:
        apply: x -> R x.
        n (int): dimension.
        apply_transpose: x -> R^T x; when missing the dominant |eigenvalue| is estimated instead.
        steps (int): iteration count.

    Returns:
        float: the estimate.
    """
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        w = apply(v)
        if apply_transpose is not None:
            w = apply_transpose(w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        est = nrm
        v = w / nrm
    return float(np.sqrt(est)) if apply_transpose is not None else float(est)


def operator_norm(op: DenseOperator, steps: int = NORM_ESTIMATE_STEPS) -> float:
    M = op.entries
    return estimate_norm(lambda x: M @ x, M.shape[1], lambda x: M.T @ x, steps)


def _fixed_point(apply_R: Callable[[np.ndarray], np.ndarray], u0: np.ndarray, tol: float,
                 max_iters: int, norm_R: float | None) -> tuple[np.ndarray, NeumannSolveReport]:
    """Iterates u <- R u + u0 from u0 and stops on the a-posteriori bound."""
    u = u0.copy()
    trace: list[float] = []
    bound = float("inf")
    growing = 0
    for it in range(1, max_iters + 1):
        u_next = apply_R(u) + u0
        step = float(np.max(np.abs(u_next - u)))
        trace.append(step)
        u = u_next
        growing = growing + 1 if len(trace) >= 2 and step > trace[-2] else 0
        if growing >= DIVERGENCE_PATIENCE and step > DIVERGENCE_GROWTH * min(trace):
            break
        if norm_R is not None and norm_R < 1.0:
            contraction = norm_R
        elif len(trace) >= 2 and trace[-2] > 0.0:
            contraction = min(trace[-1] / trace[-2], 0.99)
        else:
            contraction = 0.0
        bound = step / (1.0 - contraction)
        if bound < tol:
            return u, NeumannSolveReport(it, bound, True, norm_R if norm_R is not None else float("nan"), trace)
        if not np.isfinite(step):
            break
    return u, NeumannSolveReport(len(trace), bound, False,
                                 norm_R if norm_R is not None else float("nan"), trace)


def neumann_solve(A_star: DenseOperator, rhs, tol: float | None = None,
                  max_iters: int = NEUMANN_MAX_ITERS,
                  norm_R: float | None = None) -> tuple[np.ndarray, NeumannSolveReport]:
    """
    Solves A* x = rhs through the series x = sum R^n (2 rhs), R = I - 2 A*.

    Args:
        A_star (DenseOperator): operator of the form (I - R)/2.
        rhs (np.ndarray): right-hand side (vector or column block).
        tol (float, optional): bound on the error; defaults to 1e-10 * ||rhs||_inf.
        max_iters (int): iteration cap.
        norm_R (float, optional): estimate of ||R||; computed by power iteration when missing.

    Returns:
        tuple[np.ndarray, NeumannSolveReport]: the solution and how it was obtained.
    """
    rhs = np.asarray(rhs, dtype=float)
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    if scale == 0.0:
        return np.zeros_like(rhs), NeumannSolveReport(0, 0.0, True)
    if tol is None:
        tol = NEUMANN_REL_TOL * scale
    M = A_star.entries
    if norm_R is None:
        R = np.eye(M.shape[0]) - 2.0 * M
        norm_R = estimate_norm(lambda x: R @ x, M.shape[0], lambda x: R.T @ x)
    if norm_R >= 1.0:
        logger.warning("Neumann bound cannot be certified: ||R|| estimate %.3f >= 1", norm_R)
        norm_R = None

    def apply_R(u):
        return u - 2.0 * (M @ u)

    x, report = _fixed_point(apply_R, 2.0 * rhs, tol, max_iters, norm_R)
    logger.debug("Neumann solve: %d iterations, bound %.3e", report.iterations, report.residual_bound)
    return x, report


def rank_one_inverse(a) -> DenseOperator:
    """
    Exact inverse of I + 1 a^T, the identity plus a matrix whose rows all equal a.

    Raises:
        FactorizationError: if |1 + sum(a)| <= 1e-8.
    """
    a = np.asarray(a, dtype=float)
    denom = 1.0 + a.sum()
    if abs(denom) <= RANK_ONE_TOL:
        raise FactorizationError(f"I + 1a^T is nearly singular: 1 + sum(a) = {denom:.3e}")
    n = a.size
    return DenseOperator(np.eye(n) - np.outer(np.ones(n), a) / denom)


def apply_rank_one_inverse(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Same as rank_one_inverse(a) @ v without forming the matrix."""
    denom = 1.0 + a.sum()
    if abs(denom) <= RANK_ONE_TOL:
        raise FactorizationError(f"I + 1a^T is nearly singular: 1 + sum(a) = {denom:.3e}")
    return v - (a @ v) / denom


# Assembly

def _self_cot(ctx: KernelContext, c: Curve) -> np.ndarray:
    return cot_matrix(ctx, c.points, c.points, skip_diagonal=True)


def assemble_AstarB(bottom: Curve, ctx: KernelContext | None = None) -> DenseOperator:
    """Bottom double-layer operator: de Re[K_ij z_e,j] off the diagonal, 1/2 - de Re[z_ee/(4 pi i z_e)] on it."""
    ctx = ctx or KernelContext(bottom.horizontal_period)
    de = bottom.param_step
    M = de * np.real(_self_cot(ctx, bottom) * bottom.d1[None, :])
    diag = 0.5 - de * np.real(bottom.d2 / (4j * np.pi * bottom.d1))
    np.fill_diagonal(M, diag)
    return DenseOperator(M)


def assemble_AstarS(surface: Curve, A_tw: float, ctx: KernelContext | None = None) -> DenseOperator:
    """Surface operator acting on d(mu)/dt; the diagonal uses the second-derivative-free form."""
    ctx = ctx or KernelContext(surface.horizontal_period)
    de = surface.param_step
    off = de * np.real(_self_cot(ctx, surface) * surface.d1[None, :])
    M = A_tw * off
    np.fill_diagonal(M, 0.5 - A_tw * off.sum(axis=1))
    return DenseOperator(M)


def assemble_AS(surface: Curve, A_tw: float, ctx: KernelContext | None = None) -> DenseOperator:
    """
    Surface operator acting on d(gamma)/dt.

    Off the diagonal M_ij = A de Re[K_ij z_e,i]. The diagonal is 1/2 + A de sum_j Re[K_ij z_e,j].
    The principal value of that sum vanishes on a closed period, so its punctured
    discrete value equals the skipped j = i sample of the regular part of the row kernel,
    de Re[z_ee / (4 pi i z_e)], up to quadrature error. The diagonal is thus 1/2 plus the
    self-interaction the punctured sum omits, the same correction A*_B writes out
    explicitly, and tends to 1/2 as de -> 0.
    """
    ctx = ctx or KernelContext(surface.horizontal_period)
    de = surface.param_step
    K = _self_cot(ctx, surface)
    M = A_tw * de * np.real(K * surface.d1[:, None])
    null_sum = de * np.real(K @ surface.d1)
    np.fill_diagonal(M, 0.5 + A_tw * null_sum)
    return DenseOperator(M)


def assemble_BB(bottom: Curve, bottom_dual: Curve, ctx: KernelContext | None = None) -> DenseOperator:
    """
    Bottom vortex-sheet system: zero normal flux at the first N-1 dual nodes, total circulation last.

    Row i < N-1: de Im[z~_e(i) K(z~(i) - z(j))]. Last row: de.
    """
    ctx = ctx or KernelContext(bottom.horizontal_period)
    de = bottom.param_step
    n = bottom.n_points
    targets = bottom_dual.points[: n - 1]
    K = cot_matrix(ctx, targets, bottom.points)
    M = np.empty((n, n))
    M[: n - 1] = de * np.imag(bottom_dual.d1[: n - 1, None] * K)
    M[n - 1] = de
    return DenseOperator(M)


def assemble_coupling_D(surface: Curve, bottom: Curve, A_tw: float,
                        ctx: KernelContext | None = None) -> tuple[DenseOperator, DenseOperator]:
    """(C_D, D_D): bottom-to-surface and surface-to-bottom double-layer couplings."""
    ctx = ctx or KernelContext(surface.horizontal_period)
    K_sb = cot_matrix(ctx, surface.points, bottom.points)
    K_bs = cot_matrix(ctx, bottom.points, surface.points)
    C = A_tw * bottom.param_step * np.real(K_sb * bottom.d1[None, :])
    D = surface.param_step * np.real(K_bs * surface.d1[None, :])
    return DenseOperator(C), DenseOperator(D)


def assemble_coupling_V(surface: Curve, bottom: Curve, bottom_dual: Curve, A_tw: float,
                        ctx: KernelContext | None = None) -> tuple[DenseOperator, DenseOperator]:
    """(C_V, D_V): bottom sheet seen tangentially by the surface, surface sheet seen normally by the bottom."""
    ctx = ctx or KernelContext(surface.horizontal_period)
    n_b = bottom.n_points
    K_sb = cot_matrix(ctx, surface.points, bottom.points)
    C = A_tw * bottom.param_step * np.real(K_sb * surface.d1[:, None])
    K_bs = cot_matrix(ctx, bottom_dual.points[: n_b - 1], surface.points)
    D = np.zeros((n_b, surface.n_points))
    D[: n_b - 1] = surface.param_step * np.imag(K_bs * bottom_dual.d1[: n_b - 1, None])
    return DenseOperator(C), DenseOperator(D)


def factorize_BB(BB: DenseOperator):
    """
    LU factorization of the bottom circulation system.

    Raises:
        FactorizationError: if a pivot is numerically zero.
    """
    lu, piv = lu_factor(BB.entries)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * pivots.max():
        raise FactorizationError(
            f"bottom system is singular (pivot ratio {pivots.min() / pivots.max():.3e}); "
            "check that the bottom sampling is close to uniform")
    return lu, piv


def dense_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """One-off LU solve with a singularity check."""
    lu, piv = lu_factor(M)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * pivots.max():
        raise FactorizationError(f"system is singular (pivot ratio {pivots.min() / pivots.max():.3e})")
    return lu_solve((lu, piv), rhs)


@dataclass
class OperatorCache:
    """Static bottom operators of a run; built once, reused every step."""
    ctx: KernelContext
    bottom: Curve | None
    bottom_dual: Curve | None = None
    AstarB: DenseOperator | None = None
    AstarB_inv: np.ndarray | None = None
    BB: DenseOperator | None = None
    BB_lu: tuple | None = None

    @property
    def deep_water(self) -> bool:
        return self.bottom is None

    def solve_BB(self, rhs: np.ndarray) -> np.ndarray:
        if self.BB_lu is None:
            raise FactorizationError("bottom circulation system was not factorized")
        return lu_solve(self.BB_lu, rhs)


def build_operator_cache(ctx: KernelContext, bottom: Curve | None, formulation: str) -> OperatorCache:
    """
    Assembles and inverts the bottom operators a formulation needs.

    The dipole formulation needs the inverse of A*_B, computed once by the
    Neumann series on the identity columns. The vortex formulation needs the
    LU factors of B_B.
    """
    cache = OperatorCache(ctx=ctx, bottom=bottom)
    if bottom is None:
        return cache
    cache.bottom_dual = dual_curve(bottom)
    if formulation == "dipole":
        cache.AstarB = assemble_AstarB(bottom, ctx)
        inv, report = neumann_solve(cache.AstarB, np.eye(bottom.n_points), tol=1e-13)
        if not report.converged:
            raise NeumannDivergenceError("inverse of the bottom double-layer operator did not converge",
                                         trace=report.trace)
        cache.AstarB_inv = inv
        logger.debug("A*_B inverted in %d Neumann iterations", report.iterations)
    else:
        cache.BB = assemble_BB(bottom, cache.bottom_dual, ctx)
        cache.BB_lu = factorize_BB(cache.BB)
    return cache


def assemble_and_solve_calA_D(surface: Curve, A_tw: float,
                              coupling: tuple[DenseOperator, np.ndarray, DenseOperator] | None,
                              rhs, ctx: KernelContext | None = None, tol: float | None = None,
                              max_iters: int = NEUMANN_MAX_ITERS) -> np.ndarray:
    """
    Solves (A*_S - C_D A*_B^-1 D_D) x = rhs for d(mu_S)/dt.

    The fixed point u <- u - 2 At^-1 (calA u) + 2 At^-1 rhs is preconditioned by
    At = I + 1 a^T with a_j = A_tw de Re z_e(j) / L (a = 0 in deep water).

    Args:
        surface (Curve): current surface.
        A_tw (float): Atwood number.
        coupling: (C_D, A*_B inverse, D_D), or None in deep water.
        rhs (np.ndarray): right-hand side.
        ctx (KernelContext, optional): strip period.
        tol (float, optional): a-posteriori bound target.
        max_iters (int): iteration cap.

    Returns:
        np.ndarray: the solution.

    Raises:
        NeumannDivergenceError: if the fixed point does not settle.
    """
    if A_tw <= -1.0:
        raise ValueError(f"Atwood number must exceed -1, got {A_tw}")
    rhs = np.asarray(rhs, dtype=float)
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    if scale == 0.0:
        return np.zeros_like(rhs)
    ctx = ctx or KernelContext(surface.horizontal_period)
    AS = assemble_AstarS(surface, A_tw, ctx).entries
    if coupling is None:
        a = np.zeros(surface.n_points)

        def apply_calA(u):
            return AS @ u
    else:
        C, B_inv, D = coupling
        a = A_tw * surface.param_step * np.real(surface.d1) / surface.horizontal_period

        def apply_calA(u):
            return AS @ u - C.entries @ (B_inv @ (D.entries @ u))

    def apply_R(u):
        return u - 2.0 * apply_rank_one_inverse(a, apply_calA(u))

    u0 = 2.0 * apply_rank_one_inverse(a, rhs)
    x, report = _fixed_point(apply_R, u0, tol if tol is not None else NEUMANN_REL_TOL * scale,
                             max_iters, None)
    if not report.converged:
        raise NeumannDivergenceError(
            f"dipole density solve did not converge in {report.iterations} iterations "
            f"(last increment {report.trace[-1] if report.trace else float('nan'):.3e})",
            trace=report.trace)
    logger.debug("calA_D solve: %d iterations", report.iterations)
    return x


def solve_calA_V(surface: Curve, A_tw: float,
                 coupling: tuple[DenseOperator, OperatorCache, DenseOperator] | None,
                 rhs, ctx: KernelContext | None = None, tol: float | None = None,
                 max_iters: int = NEUMANN_MAX_ITERS) -> np.ndarray:
    """
    Solves (A_S - C_V B_B^-1 D_V) x = rhs for d(gamma_S)/dt.

    Tries the unpreconditioned fixed point first and falls back to a dense LU
    solve of the assembled operator if it stalls.
    """
    rhs = np.asarray(rhs, dtype=float)
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    if scale == 0.0:
        return np.zeros_like(rhs)
    ctx = ctx or KernelContext(surface.horizontal_period)
    AS = assemble_AS(surface, A_tw, ctx).entries
    if coupling is None:
        def apply_calA(u):
            return AS @ u
    else:
        C, cache, D = coupling

        def apply_calA(u):
            return AS @ u - C.entries @ cache.solve_BB(D.entries @ u)

    def apply_R(u):
        return u - 2.0 * apply_calA(u)

    x, report = _fixed_point(apply_R, 2.0 * rhs, tol if tol is not None else NEUMANN_REL_TOL * scale,
                             max_iters, None)
    if report.converged:
        logger.debug("calA_V solve: %d iterations", report.iterations)
        return x
    logger.warning("vortex density fixed point stalled after %d iterations; using dense LU",
                   report.iterations)
    if coupling is None:
        M = AS
    else:
        C, cache, D = coupling
        M = AS - C.entries @ cache.solve_BB(D.entries)
    return dense_solve(M, rhs)


if __name__ == '__main__':
    from core.geometry import build_curve
    L, N = 2 * np.pi, 128
    e = L * np.arange(N) / N
    bottom = build_curve(e - 1j + 0.1j * np.cos(e), L)
    A = assemble_AstarB(bottom)
    print(f"||I - 2A*_B|| ~ {operator_norm(DenseOperator(np.eye(N) - 2 * A.entries)):.4f}")
