"""Mollifiers, mollified dipole pairs and the assembled right-hand side."""
from dataclasses import dataclass

import numpy as np

from .errors import SourceGeometryError, UnderResolvedError

# minimum number of grid cells across the mollifier radius
MIN_CELLS = 2.0


def mollifier_radius(m):
    return 1.0 / (4.0 * m)


@dataclass(frozen=True)
class MeasureSource:
    """k mu_{t,m} + j sigma_m with mu_{t,m} = (sigma_m(.-t e_N) - sigma_m(.+t e_N)) / t.

    ``m`` sets the bump radius eps = 1/(4m); ``eps`` may be given directly
    instead (it then overrides ``m``).
    """

    k: float = 1.0
    j: float = 0.0
    t: float = 0.25
    m: float = 4
    eps: float = None

    def __post_init__(self):
        if self.k < 0 or self.j < 0:
            raise ValueError("source strengths k, j must be nonnegative")
        if not 0.0 < self.t < 1.0:
            raise ValueError(f"dipole half-separation t must lie in (0, 1), got {self.t}")
        if self.eps is None and self.m < 1:
            raise ValueError(f"mollifier index m must be >= 1, got {self.m}")

    @property
    def radius(self):
        return self.eps if self.eps is not None else mollifier_radius(self.m)

    def check_geometry(self):
        e = self.radius
        if self.k > 0 and not e < self.t:
            raise SourceGeometryError(
                f"mollifier radius {e:g} must be below the half-separation t={self.t:g}"
            )
        if self.k > 0 and not self.t + e < 1.0:
            raise SourceGeometryError(f"support of the pole at t={self.t:g} leaves the ball")


def bump(r):
    """exp(-1/(1-r^2)) on r < 1, zero outside."""
    out = np.zeros_like(r, dtype=float)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollifier(grid, center, radius, min_cells=MIN_CELLS):
    """Unit-mass bump of the given radius centred at ``center``.

    The discrete integral (node sum times h^N) is exactly 1.
    """
    if radius < min_cells * grid.h:
        raise UnderResolvedError(
            f"mollifier radius {radius:g} spans {radius / grid.h:.2f} cells; "
            f"need at least {min_cells:g} (h={grid.h:g})"
        )
    center = np.asarray(center, dtype=float)
    r = np.linalg.norm(grid.points - center, axis=-1) / radius
    vals = bump(r)
    mass = vals.sum() * grid.cell_volume
    if mass <= 0:
        raise SourceGeometryError(f"mollifier at {center} has no support inside the ball")
    return grid.field(vals / mass)


def pole(grid, t):
    p = np.zeros(grid.dimension)
    p[-1] = t
    return p


def dipole_part(grid, src, min_cells=MIN_CELLS):
    """mu_{t,m} (unit strength), x_N-odd on a symmetric grid."""
    up = mollifier(grid, pole(grid, src.t), src.radius, min_cells)
    # mirror image keeps exact oddness
    return grid.field((up.values - up.values[grid.reflection]) / src.t)


def dirac_part(grid, src, min_cells=MIN_CELLS):
    return mollifier(grid, np.zeros(grid.dimension), src.radius, min_cells)


def dipole_field(grid, src, min_cells=MIN_CELLS):
    """k mu_{t,m} + j sigma_m as one field."""
    src.check_geometry()
    vals = np.zeros(grid.n)
    if src.k:
        vals += src.k * dipole_part(grid, src, min_cells).values
    if src.j:
        vals += src.j * dirac_part(grid, src, min_cells).values
    return grid.field(vals)


def t_schedule(t0=0.25, depth=3):
    """t_i = 2^{-i} t0, i = 0..depth-1."""
    return [t0 * 2.0 ** (-i) for i in range(depth)]


def coupled_source(k, j, t, ratio=0.25):
    """Source with the bump radius tied to the separation: eps = ratio * t."""
    eps = ratio * t
    return MeasureSource(k=k, j=j, t=t, m=1.0 / (4.0 * eps), eps=eps)
