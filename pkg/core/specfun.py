"""Complete elliptic integrals, Jacobi cn and the cnoidal dispersion solve.

Everything is computed from the arithmetic-geometric mean started at
(1, sqrt(m1)) with m1 = 1 - m, so parameters extremely close to 1 (long
solitary waves) keep full relative accuracy when m1 is passed explicitly.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from core.errors import DomainError, NoRootError

logger = logging.getLogger(__name__)

AGM_TOL = 1e-16
AGM_MAX_ITERS = 60


@dataclass(frozen=True)
class EllipticParam:
    """Elliptic parameter m in (0, 1) together with its complement m1 = 1 - m."""
    m: float
    m1: float

    def __post_init__(self):
        if not (0.0 < self.m < 1.0 and 0.0 < self.m1 < 1.0):
            raise DomainError(f"elliptic parameter must lie strictly in (0, 1), got m={self.m}, m1={self.m1}")

    @classmethod
    def from_complement(cls, m1: float) -> "EllipticParam":
        return cls(m=1.0 - m1, m1=m1)


def _complement(m: float, m1: float | None) -> tuple[float, float]:
    if m1 is None:
        m1 = 1.0 - m
    else:
        m = 1.0 - m1
    if m < 0.0 or m1 <= 0.0:
        raise DomainError(f"elliptic parameter must satisfy 0 <= m < 1, got m={m}")
    return m, m1


def _agm_sequence(m: float, m1: float) -> tuple[list[float], list[float]]:
    """(a_n, c_n) of the AGM started at a0=1, b0=sqrt(m1), c0=sqrt(m)."""
    a, b, c = 1.0, math.sqrt(m1), math.sqrt(m)
    a_seq, c_seq = [a], [c]
    for _ in range(AGM_MAX_ITERS):
        if abs(c) <= AGM_TOL * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    return a_seq, c_seq


def elliptic_K(m: float, m1: float | None = None) -> float:
    """
    Complete elliptic integral of the first kind.

    Args:
        m (float): parameter, 0 <= m < 1.
        m1 (float, optional): complementary parameter 1 - m; takes precedence over m.

    Returns:
        float: K(m).

    Raises:
        DomainError: if m >= 1 or m < 0.
    """
    m, m1 = _complement(m, m1)
    a_seq, _ = _agm_sequence(m, m1)
    return math.pi / (2.0 * a_seq[-1])


def elliptic_E(m: float, m1: float | None = None) -> float:
    """Complete elliptic integral of the second kind; E(1) = 1 is returned as the limit."""
    if m1 is None and m == 1.0:
        return 1.0
    m, m1 = _complement(m, m1)
    a_seq, c_seq = _agm_sequence(m, m1)
    s = sum(2.0 ** (n - 1) * c * c for n, c in enumerate(c_seq))
    return math.pi / (2.0 * a_seq[-1]) * (1.0 - s)


def jacobi_cn(u, m: float, m1: float | None = None):
    """
    Jacobi cn(u, m) by the descending Landen (AGM) recurrence.

    Args:
        u (float | np.ndarray): argument(s).
        m (float): parameter, 0 <= m < 1.
        m1 (float, optional): complementary parameter.

    Returns:
        float | np.ndarray: cn(u, m), same shape as u.
    """
    m, m1 = _complement(m, m1)
    uu = np.asarray(u, dtype=float)
    a_seq, c_seq = _agm_sequence(m, m1)
    n = len(a_seq) - 1
    phi = 2.0**n * a_seq[-1] * uu
    for k in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_seq[k] / a_seq[k] * np.sin(phi)))
    out = np.cos(phi)
    return out if np.ndim(u) else float(out)


def jacobi_sn(u, m: float, m1: float | None = None):
    m, m1 = _complement(m, m1)
    uu = np.asarray(u, dtype=float)
    a_seq, c_seq = _agm_sequence(m, m1)
    n = len(a_seq) - 1
    phi = 2.0**n * a_seq[-1] * uu
    for k in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_seq[k] / a_seq[k] * np.sin(phi)))
    out = np.sin(phi)
    return out if np.ndim(u) else float(out)


@dataclass(frozen=True)
class CnoidalWave:
    """Periodic Green-Naghdi cnoidal wave of a given period, amplitude and depth."""
    param: EllipticParam
    K: float
    E: float
    c: float
    eta1: float
    eta2: float
    eta3: float
    A: float
    L: float

    @property
    def period(self) -> float:
        return self.L / self.c

    def elevation(self, x, t: float = 0.0):
        """eta2 + A cn^2(2K (x - c t)/L, m)."""
        arg = 2.0 * self.K * (np.asarray(x, dtype=float) - self.c * t) / self.L
        return self.eta2 + self.A * jacobi_cn(arg, self.param.m, self.param.m1) ** 2


def _cnoidal_terms(m1: float, A: float, h0: float, g: float) -> tuple[float, float, float, float, float, float]:
    m = 1.0 - m1
    K = elliptic_K(m, m1)
    E = elliptic_E(m, m1)
    ratio = E / K
    eta1 = -A / m * ratio
    eta2 = A / m * (m1 - ratio)
    eta3 = A / m * (1.0 - ratio)
    c2 = g * h0 * (1.0 + eta1 / h0) * (1.0 + eta2 / h0) * (1.0 + eta3 / h0)
    return K, E, c2, eta1, eta2, eta3


def _dispersion_residual(m1: float, L: float, A: float, h0: float, g: float) -> float:
    """Relative residual of A L^2 = (16/3) m K^2 (h0^2/g) c^2."""
    K, _, c2, *_ = _cnoidal_terms(m1, A, h0, g)
    target = A * L * L
    return (target - 16.0 / 3.0 * (1.0 - m1) * K * K * h0 * h0 / g * c2) / target


def solve_cnoidal_m(L_period: float, A: float, h0: float, g: float,
                    tol: float = 1e-13, max_iters: int = 400) -> EllipticParam:
    """
    Finds the cnoidal parameter m matching the dispersion relation by bisection.

    The search runs over log(m1), m1 = 1 - m, since long waves put m within
    machine epsilon of 1.

    Args:
        L_period (float): wave period in x.
        A (float): trough-to-crest amplitude.
        h0 (float): rest depth.
        g (float): gravity.
        tol (float): relative residual target.
        max_iters (int): bisection cap.

    Returns:
        EllipticParam: the root.

    Raises:
        ValueError: on non-positive inputs.
        NoRootError: when the bracket shows no sign change.
    """
    if A <= 0 or L_period <= 0 or h0 <= 0 or g <= 0:
        raise ValueError(f"cnoidal inputs must be positive: L={L_period}, A={A}, h0={h0}, g={g}")
    lo, hi = math.log(1e-300), math.log(1.0 - 1e-9)
    r_lo = _dispersion_residual(math.exp(lo), L_period, A, h0, g)
    r_hi = _dispersion_residual(math.exp(hi), L_period, A, h0, g)
    if r_lo * r_hi > 0:
        raise NoRootError(f"no sign change of the cnoidal dispersion residual for A={A}, L={L_period}",
                          residuals=(r_lo, r_hi))
    mid, r_mid = lo, r_lo
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        r_mid = _dispersion_residual(math.exp(mid), L_period, A, h0, g)
        if abs(r_mid) < tol or hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
        if r_mid * r_lo > 0:
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    logger.debug("cnoidal m1=%.6e residual=%.3e", math.exp(mid), r_mid)
    return EllipticParam.from_complement(math.exp(mid))


def cnoidal_wave(L_period: float, A: float, h0: float, g: float) -> CnoidalWave:
    param = solve_cnoidal_m(L_period, A, h0, g)
    K, E, c2, eta1, eta2, eta3 = _cnoidal_terms(param.m1, A, h0, g)
    return CnoidalWave(param=param, K=K, E=E, c=math.sqrt(c2), eta1=eta1, eta2=eta2,
                       eta3=eta3, A=A, L=L_period)


if __name__ == '__main__':
    print(f"K(0.5) = {elliptic_K(0.5):.12f}")
    print(f"E(0.5) = {elliptic_E(0.5):.12f}")
    wave = cnoidal_wave(40 * math.pi, 0.1, 1.0, 1.0)
    print(f"m1 = {wave.param.m1:.3e}, c = {wave.c:.6f}, L/c = {wave.period:.4f}")
