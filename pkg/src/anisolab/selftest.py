"""Kernel self-test: Green symmetry, difference-quotient oracle, harmonicity."""
import numpy as np

from . import kernels
from .grid import Grid

DELTAS = (1e-2, 5e-3, 2.5e-3)
SYMMETRY_TOL = 1e-12
MIN_ORDER = 1.8


def _sample_nodes(grid, rmin=0.2, rmax=0.9):
    r = grid.radius
    return grid.points[(r >= rmin) & (r <= rmax)]


def green_symmetry(cfg, points, pairs=2000, seed=0):
    """max |G(x, y) - G(y, x)| / max |G| over random node pairs."""
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(points), pairs)
    j = rng.integers(0, len(points), pairs)
    keep = i != j
    x, y = points[i[keep]], points[j[keep]]
    keep = np.linalg.norm(x - y, axis=-1) > 0
    x, y = x[keep], y[keep]
    gxy = kernels.green_ball(x, y, cfg)
    gyx = kernels.green_ball(y, x, cfg)
    return float(np.max(np.abs(gxy - gyx)) / np.max(np.abs(gxy)))


def difference_quotient_errors(cfg, points, deltas=DELTAS):
    """sup |(G(x, d e_N) - G(x, -d e_N)) / (2d) - dipole_green(x)| per d."""
    N = cfg.dimension
    exact = kernels.dipole_green(points, cfg)
    errs = []
    for d in deltas:
        y = np.zeros(N)
        y[-1] = d
        dq = (kernels.green_ball(points, y, cfg) - kernels.green_ball(points, -y, cfg)) / (2 * d)
        errs.append(float(np.max(np.abs(dq - exact))))
    return errs


def observed_orders(errs, deltas=DELTAS):
    return [float(np.log(a / b) / np.log(da / db))
            for a, b, da, db in zip(errs, errs[1:], deltas, deltas[1:])]


def harmonic_residual(func, points, eta=1e-3):
    """sup |Laplace_eta func| by the (2N+1)-point stencil of step eta."""
    N = points.shape[-1]
    lap = -2.0 * N * func(points)
    for d in range(N):
        e = np.zeros(N)
        e[d] = eta
        lap = lap + func(points + e) + func(points - e)
    return float(np.max(np.abs(lap / eta ** 2)))


def kernel_selftest(dimension=2, M=129, deltas=DELTAS):
    """Run every kernel oracle on the unknowns of Grid(dimension, M)."""
    cfg = kernels.KernelConfig(dimension)
    grid = Grid(dimension, M)
    pts = _sample_nodes(grid)
    errs = difference_quotient_errors(cfg, pts, deltas)
    orders = observed_orders(errs, deltas)
    harm = {
        "gamma": harmonic_residual(lambda x: kernels.gamma(x, cfg), pts),
        "dipole_kernel": harmonic_residual(lambda x: kernels.dipole_kernel(x, cfg), pts),
        "dipole_green": harmonic_residual(lambda x: kernels.dipole_green(x, cfg), pts),
    }
    sym = green_symmetry(cfg, pts)
    rng = np.random.default_rng(1)
    sphere = rng.normal(size=(200, dimension))
    sphere /= np.linalg.norm(sphere, axis=1, keepdims=True)
    boundary = float(np.max(np.abs(kernels.dipole_green(sphere, cfg))))
    checks = {
        "green_symmetry": sym <= SYMMETRY_TOL,
        "difference_quotient_order": min(orders) >= MIN_ORDER,
        "dipole_green_boundary": boundary <= 1e-12,
    }
    return {
        "dimension": dimension, "M": M, "samples": int(len(pts)),
        "symmetry_defect": sym, "deltas": list(deltas), "dq_errors": errs,
        "dq_orders": orders, "harmonic_residuals": harm, "boundary_max": boundary,
        "checks": checks, "passed": all(checks.values()), "kernel": cfg.metadata(),
    }
