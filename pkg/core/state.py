from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from core.geometry import Curve

Mode = Literal["vortex", "dipole"]


@dataclass(frozen=True)
class PointVortex:
    z: complex
    strength: float


@dataclass(frozen=True)
class SheetState:
    """Full dynamic state of a run.

    `density` is gamma_S in vortex mode and mu_S in dipole mode; `bottom_density`
    is the matching bottom quantity from the last boundary solve. `density_lag`
    holds the half-step-behind density used by the staggered integrator.
    """
    surface: Curve
    density: np.ndarray
    mode: Mode = "vortex"
    bottom: Curve | None = None
    bottom_density: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vortex_z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    vortex_strength: np.ndarray = field(default_factory=lambda: np.zeros(0))
    time: float = 0.0
    density_lag: np.ndarray | None = None

    def __post_init__(self):
        if self.density.shape != (self.surface.n_points,):
            raise ValueError(
                f"density has shape {self.density.shape}, expected ({self.surface.n_points},)")
        if self.vortex_z.shape != self.vortex_strength.shape:
            raise ValueError("vortex positions and strengths differ in length")
        if self.bottom is not None and self.bottom_density.size not in (0, self.bottom.n_points):
            raise ValueError("bottom_density does not match the bottom curve")

    @property
    def deep_water(self) -> bool:
        return self.bottom is None

    @property
    def n_vortices(self) -> int:
        return int(self.vortex_z.size)

    @property
    def vortices(self) -> list[PointVortex]:
        return [PointVortex(complex(z), float(s)) for z, s in zip(self.vortex_z, self.vortex_strength)]

    @property
    def bottom_values(self) -> np.ndarray:
        """bottom_density, or zeros when no bottom solve has happened yet."""
        if self.bottom is None:
            return np.zeros(0)
        if self.bottom_density.size == 0:
            return np.zeros(self.bottom.n_points)
        return self.bottom_density

    def evolve(self, **changes) -> "SheetState":
        return replace(self, **changes)


def make_state(surface: Curve, density, mode: Mode = "vortex", bottom: Curve | None = None,
               vortices: list[PointVortex] | None = None, bottom_density=None) -> SheetState:
    vortices = vortices or []
    return SheetState(
        surface=surface,
        density=np.asarray(density, dtype=float).copy(),
        mode=mode,
        bottom=bottom,
        bottom_density=np.zeros(0) if bottom_density is None else np.asarray(bottom_density, dtype=float),
        vortex_z=np.array([v.z for v in vortices], dtype=complex),
        vortex_strength=np.array([v.strength for v in vortices], dtype=float),
    )
