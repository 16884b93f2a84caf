import logging
from dataclasses import dataclass

import numpy as np

from core.errors import DegenerateCurveError

logger = logging.getLogger(__name__)

MIN_POINTS = 8
# Relative to the period; adjacent nodes closer than this are coincident.
COINCIDENCE_TOL = 1e-12


@dataclass(frozen=True)
class Curve:
    """Discrete periodic curve z(e_i), i = 0..N-1, with z(e_{i+N}) = z(e_i) + L.

    Attributes:
        points: complex node positions.
        horizontal_period: L, the horizontal shift after one parameter period.
        param_length: length of the parameter interval (de = param_length / N).
        d1: second-order central differences z_e at the nodes.
        d2: second-order central differences z_ee at the nodes.
        e0: parameter value of the first node (the dual grid sits at de/2).
    """
    points: np.ndarray
    horizontal_period: float
    param_length: float
    d1: np.ndarray
    d2: np.ndarray
    e0: float = 0.0

    @property
    def n_points(self) -> int:
        return int(self.points.size)

    @property
    def param_step(self) -> float:
        return self.param_length / self.points.size

    @property
    def params(self) -> np.ndarray:
        return self.e0 + self.param_step * np.arange(self.points.size)

    @property
    def speed(self) -> np.ndarray:
        """|z_e| at the nodes."""
        return np.abs(self.d1)


@dataclass(frozen=True)
class UnitFrame:
    tau: complex
    normal: complex


def _extended(points: np.ndarray, L: float) -> np.ndarray:
    """Nodes padded with one wrapped neighbour on each side."""
    return np.concatenate([points[-1:] - L, points, points[:1] + L])


def periodic_derivative(values: np.ndarray, de: float) -> np.ndarray:
    """Central difference of a periodic (no offset) array."""
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * de)


def build_curve(points, L: float, param_length: float | None = None, e0: float = 0.0) -> Curve:
    """Builds a Curve and its periodic second-order difference derivatives.

    Args:
        points: complex node positions, one period, ordered left to right.
        L: horizontal period.
        param_length: parameter period; defaults to L (e = x for a graph sampled uniformly).
        e0: parameter of the first node.

    Returns:
        Curve: the immutable curve with d1 and d2 filled.

    Raises:
        ValueError: if fewer than MIN_POINTS nodes are given or L is not positive.
        DegenerateCurveError: if two adjacent nodes coincide.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if L <= 0:
        raise ValueError(f"Horizontal period must be positive, got {L}")
    if z.size < MIN_POINTS:
        raise ValueError(f"A curve needs at least {MIN_POINTS} points, got {z.size}")
    if param_length is None:
        param_length = L
    if param_length <= 0:
        raise ValueError(f"Parameter length must be positive, got {param_length}")

    ext = _extended(z, L)
    steps = np.abs(np.diff(ext[1:]))
    bad = np.flatnonzero(steps <= COINCIDENCE_TOL * L)
    if bad.size:
        idx = int(bad[0])
        raise DegenerateCurveError(f"Nodes {idx} and {(idx + 1) % z.size} coincide", index=idx)

    de = param_length / z.size
    d1 = (ext[2:] - ext[:-2]) / (2.0 * de)
    d2 = (ext[2:] - 2.0 * z + ext[:-2]) / de**2
    return Curve(points=z, horizontal_period=float(L), param_length=float(param_length),
                 d1=d1, d2=d2, e0=float(e0))


def with_points(c: Curve, points) -> Curve:
    """Same parameterization, new node positions."""
    return build_curve(points, c.horizontal_period, c.param_length, c.e0)


def to_dual(values: np.ndarray) -> np.ndarray:
    """Two-point average of periodic node values onto the midpoints e_i + de/2."""
    values = np.asarray(values)
    return 0.5 * (values + np.roll(values, -1))


def dual_curve(c: Curve) -> Curve:
    """Curve sampled at the midpoints (e_i + e_{i+1})/2, derivatives rebuilt."""
    z = c.points
    nxt = np.concatenate([z[1:], z[:1] + c.horizontal_period])
    return build_curve(0.5 * (z + nxt), c.horizontal_period, c.param_length,
                       c.e0 + 0.5 * c.param_step)


def interp_to_primal(values_on_dual) -> np.ndarray:
    """Two-point average from the dual nodes back onto the primal nodes.

    Primal node i sits between dual nodes i-1 and i.
    """
    v = np.asarray(values_on_dual)
    return 0.5 * (np.roll(v, 1) + v)


def frame_at(c: Curve, i: int) -> UnitFrame:
    """Unit tangent and outward normal n = i*tau at node i.

    Raises:
        DegenerateCurveError: if z_e vanishes at the node.
    """
    d = c.d1[i]
    mag = abs(d)
    if mag == 0.0:
        raise DegenerateCurveError(f"Zero tangent at node {i}", index=int(i))
    tau = d / mag
    return UnitFrame(tau=complex(tau), normal=complex(1j * tau))


def normals(c: Curve) -> np.ndarray:
    """Outward unit normals i*z_e/|z_e| at every node."""
    mag = c.speed
    if np.any(mag == 0.0):
        idx = int(np.flatnonzero(mag == 0.0)[0])
        raise DegenerateCurveError(f"Zero tangent at node {idx}", index=idx)
    return 1j * c.d1 / mag


def curvature_array(c: Curve) -> np.ndarray:
    """Signed curvature Im(conj(z_e) z_ee)/|z_e|^3 at every node."""
    mag = c.speed
    if np.any(mag == 0.0):
        idx = int(np.flatnonzero(mag == 0.0)[0])
        raise DegenerateCurveError(f"Zero tangent at node {idx}", index=idx)
    return np.imag(np.conj(c.d1) * c.d2) / mag**3


def curvature(c: Curve, i: int) -> float:
    return float(curvature_array(c)[i])


def min_spacing(c: Curve) -> float:
    """Smallest distance between adjacent nodes, wrap included."""
    ext = _extended(c.points, c.horizontal_period)
    return float(np.min(np.abs(np.diff(ext[1:]))))


def enclosed_area(surface: Curve, bottom: Curve | None) -> float:
    """Area per period between the two curves, from the boundary integral of y dx.

    Without a bottom the area is measured down to y = 0.
    """
    area = surface.param_step * float(np.sum(surface.points.imag * surface.d1.real))
    if bottom is not None:
        area -= bottom.param_step * float(np.sum(bottom.points.imag * bottom.d1.real))
    return area


def normal_component(u_hat, d1) -> np.ndarray:
    """u.n from the conjugated velocity and z_e, with n = i z_e/|z_e|."""
    d1 = np.asarray(d1)
    return -np.imag(np.asarray(u_hat) * d1) / np.abs(d1)


def graph_curve(x: np.ndarray, eta: np.ndarray, L: float) -> Curve:
    """Curve of a graph y = eta(x) sampled at x, parameterized by e = x."""
    return build_curve(np.asarray(x) + 1j * np.asarray(eta), L)


def flat_curve(n: int, L: float, height: float = 0.0, x0: float = 0.0) -> Curve:
    x = x0 + L * np.arange(n) / n
    return graph_curve(x, np.full(n, height), L)


if __name__ == '__main__':
    N = 64
    e = 2 * np.pi * np.arange(N) / N
    c = build_curve(e + 0.1j * np.cos(e), 2 * np.pi)
    print(f"max |d2 - analytic| = {np.max(np.abs(c.d2 + 0.1j * np.cos(e))):.3e}")
    print(f"curvature at crest: {curvature(c, 0):.6f}")
