"""Closed-form kernels: fundamental solution, dipole kernel, ball Green functions.

All functions are vectorized: points are arrays whose last axis has length N.

Sign conventions
----------------
``gamma`` is normalized so that ``-Laplace(gamma) = delta_0``.  In two dimensions
this means ``gamma(x) = -log|x| / (2 pi)``, which is positive inside the unit
ball.  The dipole constant is ``1 / |S^{N-1}|`` for every N, which makes
``-Laplace(P_N)`` equal to the dipole source whose pairing with a test function
is ``d xi(0) / d x_N``.
"""
from dataclasses import dataclass
from math import gamma as _gamma_fn, pi

import numpy as np

from .errors import SingularPointError


def sphere_area(N):
    """Surface area of the unit sphere S^{N-1} in R^N."""
    return 2.0 * pi ** (N / 2.0) / _gamma_fn(N / 2.0)


@dataclass(frozen=True)
class KernelConfig:
    dimension: int

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension}")

    @property
    def normalization(self):
        """c_N, the fundamental-solution constant."""
        N = self.dimension
        if N == 2:
            return -1.0 / (2.0 * pi)
        return 1.0 / ((N - 2) * sphere_area(N))

    @property
    def dipole_normalization(self):
        """c~_N, the dipole-kernel constant (equal to 1/|S^{N-1}|)."""
        return 1.0 / sphere_area(self.dimension)

    def metadata(self):
        return {
            "dimension": self.dimension,
            "c_N": self.normalization,
            "c_tilde_N": self.dipole_normalization,
            "gamma_2d_convention": "gamma(x) = -log|x|/(2 pi)",
        }


def _as_points(x, N):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != N:
        raise ValueError(f"points must have last axis of length {N}, got shape {x.shape}")
    return x


def _radial_profile(r, cfg):
    """Gamma_N as a function of the radius."""
    c = cfg.normalization
    if cfg.dimension == 2:
        return c * np.log(r)
    return c * r ** (2 - cfg.dimension)


def gamma(x, cfg):
    """Fundamental solution Gamma_N(x)."""
    x = _as_points(x, cfg.dimension)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise SingularPointError("gamma is singular at the origin")
    return _radial_profile(r, cfg)


def dipole_kernel(x, cfg):
    """P_N(x) = c~_N x_N / |x|^N."""
    x = _as_points(x, cfg.dimension)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise SingularPointError("dipole kernel is singular at the origin")
    return cfg.dipole_normalization * x[..., -1] / r ** cfg.dimension


def _image_distance(x, y):
    # |y| |x - y*| with y* = y / |y|^2, written so that y = 0 is regular
    xx = np.sum(x * x, axis=-1)
    yy = np.sum(y * y, axis=-1)
    xy = np.sum(x * y, axis=-1)
    return np.sqrt(np.maximum(xx * yy - 2.0 * xy + 1.0, 0.0))


def green_ball(x, y, cfg):
    """Dirichlet Green function of the unit ball via the Kelvin image.

    ``G(x, y) = Gamma(|x - y|) - Gamma(|y| |x - y*|)``; symmetric in (x, y) and
    zero when either point lies on the unit sphere.
    """
    x = _as_points(x, cfg.dimension)
    y = _as_points(y, cfg.dimension)
    d = np.linalg.norm(x - y, axis=-1)
    if np.any(d == 0.0):
        raise SingularPointError("green_ball is singular on the diagonal x = y")
    rho = _image_distance(x, y)
    if cfg.dimension == 2:
        return cfg.normalization * (np.log(d) - np.log(rho))
    return cfg.normalization * (d ** (2 - cfg.dimension) - rho ** (2 - cfg.dimension))


def dipole_green(x, cfg):
    """y_N-derivative of ``green_ball(x, y)`` at y = 0.

    Equals ``c~_N x_N (|x|^{-N} - 1)``: the dipole kernel minus its harmonic
    image correction, so it vanishes on the unit sphere.
    """
    x = _as_points(x, cfg.dimension)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise SingularPointError("dipole_green is singular at the origin")
    return cfg.dipole_normalization * x[..., -1] * (r ** (-cfg.dimension) - 1.0)


def dirac_green(x, cfg):
    """``green_ball(x, 0)``: Gamma_N minus its boundary value."""
    x = _as_points(x, cfg.dimension)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise SingularPointError("dirac_green is singular at the origin")
    return _radial_profile(r, cfg) - _radial_profile(np.ones_like(r), cfg)
