"""Diagnostics: ray profiles, asymptotic fits, symmetry defects, weak norms,
distributional-identity residuals and the angular profile oracle."""
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from .errors import FitError, NoPositiveSolutionError, TestFunctionError
from .grid import EXTERIOR
from .nonlinearity import untruncated

# default fit window: [FIT_RMIN_CELLS * h, FIT_RMAX], minus the innermost samples
FIT_RMIN_CELLS = 4
FIT_RMAX = 0.2
FIT_DROP_INNER = 2


@dataclass
class RayProfile:
    direction: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    h: float

    def to_rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]


@dataclass
class AsymptoticFit:
    model: str
    coefficient: float
    exponent: float = None
    r_squared: float = None
    window: tuple = None
    samples: int = 0
    direction: tuple = None

    def to_dict(self):
        return asdict(self)


@dataclass
class WeakNormEstimate:
    kappa: float
    weight: str
    value: float
    level_grid: np.ndarray = field(repr=False)
    candidates: np.ndarray = field(repr=False)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def direction_from_angle(theta, N=2):
    """Unit vector at angle ``theta`` from the x_1 axis toward e_N (e_N = sin theta)."""
    e = np.zeros(N)
    e[0] = np.cos(theta)
    e[-1] = np.sin(theta)
    return e


def default_radii(grid, rmin=None, rmax=FIT_RMAX, count=40):
    """Log-spaced radii in [rmin, rmax], decreasing."""
    rmin = 2.0 * grid.h if rmin is None else rmin
    return np.geomspace(rmax, rmin, count)


def extract_ray(u, e, radii=None):
    """Multilinear interpolation of ``u`` at t*e for each radius t."""
    grid = u.grid
    e = unit(e)
    radii = default_radii(grid) if radii is None else np.asarray(radii, dtype=float)
    if np.any(radii < 2.0 * grid.h - 1e-12):
        raise FitError(f"radii must be >= 2h = {2 * grid.h:g}")
    pts = radii[:, None] * e[None, :]
    # every corner of every interpolation cell must be an unknown
    lo = np.floor((pts + 1.0) / grid.h + 1e-9).astype(int)
    lo = np.clip(lo, 0, grid.M - 2)
    for corner in np.ndindex(*(2,) * grid.dimension):
        idx = tuple((lo + np.array(corner))[:, d] for d in range(grid.dimension))
        if np.any(grid.mask[idx] == EXTERIOR):
            raise FitError("ray exits the grid mask")
    interp = RegularGridInterpolator((grid.axis,) * grid.dimension, u.full(), method="linear")
    return RayProfile(e, radii, interp(pts), grid.h)


def _window(profile, window):
    r = profile.radii
    if window is None:
        window = (FIT_RMIN_CELLS * profile.h, FIT_RMAX)
        sel = (r >= window[0] - 1e-12) & (r <= window[1] + 1e-12)
        inner = np.sort(r[sel])[:FIT_DROP_INNER]
        sel &= ~np.isin(r, inner)
    else:
        sel = (r >= window[0] - 1e-12) & (r <= window[1] + 1e-12)
    if sel.sum() < 4:
        raise FitError(f"degenerate fit window {window}: {int(sel.sum())} samples")
    return sel, (float(r[sel].min()), float(r[sel].max()))


def _constant_fit(ratio):
    c = float(np.mean(ratio))
    ss = float(np.sum(ratio ** 2))
    # uncentered goodness: 1 for a perfectly constant ratio
    r2 = 1.0 - float(np.sum((ratio - c) ** 2)) / ss if ss > 0 else 1.0
    return c, min(max(r2, 0.0), 1.0)


def fit_dipole_coefficient(profile, cfg, window=None):
    """Least-squares constant fit of u(te) / P_N(te); approaches 2k."""
    e = profile.direction
    if abs(e[-1]) < 1e-12:
        raise FitError("dipole coefficient needs e_N != 0")
    sel, win = _window(profile, window)
    r = profile.radii[sel]
    ratio = profile.values[sel] / kernels.dipole_kernel(r[:, None] * e[None, :], cfg)
    c, r2 = _constant_fit(ratio)
    return AsymptoticFit("coefficient_vs_kernel", c, r_squared=r2, window=win,
                         samples=int(sel.sum()), direction=tuple(map(float, e)))


def fit_dirac_coefficient(profile, cfg, window=None):
    """Least-squares constant fit of u(te) / Gamma_N(te) on an equatorial ray."""
    e = profile.direction
    if abs(e[-1]) > 1e-12:
        raise FitError("Dirac coefficient is read on equatorial rays (e_N = 0)")
    sel, win = _window(profile, window)
    r = profile.radii[sel]
    ratio = profile.values[sel] / kernels.gamma(r[:, None] * e[None, :], cfg)
    c, r2 = _constant_fit(ratio)
    return AsymptoticFit("coefficient_vs_kernel", c, r_squared=r2, window=win,
                         samples=int(sel.sum()), direction=tuple(map(float, e)))


def fit_power_law(profile, window=None):
    """log-log fit |u(te)| ~ A t^{-alpha}; returns alpha as ``exponent``."""
    if window is None:
        sel = np.ones(profile.radii.size, dtype=bool)
        win = (float(profile.radii.min()), float(profile.radii.max()))
    else:
        sel, win = _window(profile, window)
    v = profile.values[sel]
    if np.any(v == 0) or (np.any(v > 0) and np.any(v < 0)):
        raise FitError("power-law fit needs values of one sign on the window")
    x = np.log(profile.radii[sel])
    y = np.log(np.abs(v))
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return AsymptoticFit("power_law", float(np.sign(v[0]) * np.exp(intercept)),
                         exponent=float(-slope), r_squared=min(max(r2, 0.0), 1.0),
                         window=win, samples=int(sel.sum()),
                         direction=tuple(map(float, profile.direction)))


def odd_defect(u):
    """max |u(x', x_N) + u(x', -x_N)| over the grid."""
    return float(np.max(np.abs(u.values + u.values[u.grid.reflection])))


def _weights(grid, weight):
    if weight in ("dx", None):
        return np.full(grid.n, grid.cell_volume)
    if weight in ("|x|dx", "xdx", "rdx"):
        return grid.radius * grid.cell_volume
    raise ValueError(f"unknown weight {weight!r}; use 'dx' or '|x|dx'")


def weak_norm(u, kappa, weight="dx", levels=None):
    """Marcinkiewicz M^kappa quasi-norm estimate over superlevel sets.

    value = max over lambda of int_{|u|>lambda} |u| dmu / mu(|u|>lambda)^{1/kappa'}.
    ``levels`` = None evaluates every distinct superlevel set of the node values
    (the finest level grid); an integer uses that many log-spaced lambdas.
    """
    if not kappa > 1:
        raise ValueError(f"kappa must exceed 1, got {kappa}")
    grid = u.grid
    a = np.abs(u.values)
    w = _weights(grid, weight)
    ok = np.isfinite(a) & (w > 0)
    a, w = a[ok], w[ok]
    inv_kp = 1.0 - 1.0 / kappa
    order = np.argsort(-a, kind="stable")
    a_sorted, w_sorted = a[order], w[order]
    mass = np.cumsum(a_sorted * w_sorted)
    meas = np.cumsum(w_sorted)
    if not a_sorted.size or a_sorted[0] == 0:
        return WeakNormEstimate(kappa, weight, 0.0, np.array([]), np.array([]))
    if levels is None:
        # strict superlevel sets {|u| > lambda} end where the value changes
        last = np.flatnonzero(np.r_[a_sorted[1:] != a_sorted[:-1], True])
        last = last[a_sorted[last] > 0]
        lam = np.r_[a_sorted[last[1:]], 0.0][: last.size]
    else:
        pos = a_sorted[a_sorted > 0]
        lam = np.geomspace(pos[0], pos[-1], int(levels) + 1)[1:]
        count = np.searchsorted(-a_sorted, -lam, side="left")
        keep = count > 0
        lam, last = lam[keep], count[keep] - 1
    cand = mass[last] / meas[last] ** inv_kp
    return WeakNormEstimate(kappa, weight, float(cand.max()), lam, cand)


def marcinkiewicz_check(u, kappa, q, weight="dx", sets=20, seed=0, norm=None):
    """Fit C(q, kappa) in int_E |u|^q dmu <= C ||u||^q mu(E)^{1 - q/kappa}
    over random unions of grid cells."""
    if not 1 <= q < kappa:
        raise ValueError("need 1 <= q < kappa")
    grid = u.grid
    a = np.abs(u.values)
    w = _weights(grid, weight)
    ok = np.isfinite(a) & (w > 0)
    a, w = a[ok], w[ok]
    norm = weak_norm(u, kappa, weight).value if norm is None else norm
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(sets):
        frac = rng.uniform(0.001, 0.5)
        # bias some sets toward the singular region
        if rng.uniform() < 0.5:
            p = a / a.sum()
            pick = rng.choice(a.size, size=max(1, int(frac * a.size)), replace=False, p=p)
        else:
            pick = rng.choice(a.size, size=max(1, int(frac * a.size)), replace=False)
        lhs = float(np.sum(a[pick] ** q * w[pick]))
        rhs = norm ** q * float(np.sum(w[pick])) ** (1.0 - q / kappa)
        ratios.append(lhs / rhs)
    return {"C": float(np.max(ratios)), "ratios": ratios, "norm": norm}


@dataclass(frozen=True)
class PolyTestFunction:
    """xi(x) = (1 - |x|^2)^q (a + b x_N)."""

    a: float = 0.0
    b: float = 1.0
    q: float = 1.0

    def __call__(self, x):
        w = 1.0 - np.sum(x * x, axis=-1)
        return w ** self.q * (self.a + self.b * x[..., -1])

    def neg_laplacian(self, x):
        N = x.shape[-1]
        r2 = np.sum(x * x, axis=-1)
        w = 1.0 - r2
        q = self.q
        L = self.a + self.b * x[..., -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            wq2 = np.where(w > 0, w ** (q - 2.0), 0.0) if q < 2 else w ** (q - 2.0)
        lap_wq = 4.0 * q * (q - 1.0) * wq2 * r2 - 2.0 * N * q * w ** (q - 1.0)
        lap = L * lap_wq - 4.0 * q * w ** (q - 1.0) * self.b * x[..., -1]
        return -lap

    @property
    def value_at_origin(self):
        return self.a

    @property
    def dN_at_origin(self):
        return self.b


CANONICAL_TEST_FUNCTIONS = (
    PolyTestFunction(0.0, 1.0, 1.0),
    PolyTestFunction(1.0, 0.0, 1.0),
    PolyTestFunction(1.0, 1.0, 2.0),
    PolyTestFunction(0.0, 1.0, 2.0),
)


def _check_boundary(xi, N):
    rng = np.random.default_rng(12345)
    pts = rng.normal(size=(64, N))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    if np.max(np.abs(xi(pts))) > 1e-12:
        raise TestFunctionError("test function does not vanish on the unit sphere")


def identity_residual(u, g, src, test_fns=CANONICAL_TEST_FUNCTIONS, return_tails=False):
    """|int u(-Laplace xi) + g(u) xi dx - 2k d_N xi(0) - j xi(0)| per test function.

    The g(u) xi integral is accumulated over concentric shells of width h from
    the boundary inward; the innermost shell is reported as the tail.
    """
    grid = u.grid
    N = grid.dimension
    g = untruncated(g) if not hasattr(g, "level") else g
    gu = g(u.values)
    r = grid.radius
    shell = np.floor(r / grid.h).astype(int)
    out, tails = [], []
    for xi in test_fns:
        _check_boundary(xi, N)
        lin = grid.integrate(u.values * xi.neg_laplacian(grid.points))
        per_node = gu * xi(grid.points) * grid.cell_volume
        shells = np.bincount(shell, weights=per_node)
        partial = np.cumsum(shells[::-1])[::-1]  # partial[i] = integral over r >= i h
        nonlin = float(partial[0])
        rhs = 2.0 * src.k * xi.dN_at_origin + src.j * xi.value_at_origin
        out.append(abs(lin + nonlin - rhs))
        tails.append(float(shells[0]))
    out = np.array(out)
    if return_tails:
        return out, np.array(tails)
    return out


@dataclass
class AngularProfile:
    p: float
    alpha: float
    slope: float
    theta: np.ndarray
    omega: np.ndarray
    _sol: object = field(repr=False, default=None)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self._sol.sol(theta)[0]

    def phi(self, e):
        """Separable profile on the sphere: omega(angle of e), odd in e_N."""
        e = np.atleast_2d(np.asarray(e, dtype=float))
        th = np.arctan2(np.abs(e[:, -1]), e[:, 0])
        return np.sign(e[:, -1]) * self(th)

    def residual(self, samples=20001):
        """Integral-form residual of omega'' + alpha^2 omega = omega^p on a fine grid,
        relative to max |omega|.

        omega(th) - s th - int_0^th (th - s)(omega^p - alpha^2 omega) ds, by Simpson.
        """
        th = np.linspace(0.0, np.pi, samples)
        w = self(th)
        rhs = np.abs(w) ** (self.p - 1.0) * w - self.alpha ** 2 * w
        # int_0^th (th - s) F(s) ds = th * int F - int s F
        I0 = cumulative_simpson(rhs, x=th, initial=0.0)
        I1 = cumulative_simpson(th * rhs, x=th, initial=0.0)
        defect = np.max(np.abs(w - self.slope * th - (th * I0 - I1)))
        return float(defect / np.max(np.abs(w)))


def _shoot(slope, alpha, p):
    def rhs(_, y):
        return [y[1], np.abs(y[0]) ** (p - 1.0) * y[0] - alpha ** 2 * y[0]]

    def hit_zero(th, y):
        return y[0] if th > 1e-9 else 1.0

    hit_zero.terminal = True
    hit_zero.direction = -1

    def blow_up(_, y):
        return 1e6 - abs(y[0])

    blow_up.terminal = True
    return solve_ivp(rhs, (0.0, np.pi), [0.0, slope], method="DOP853", rtol=1e-12,
                     atol=1e-14, events=(hit_zero, blow_up), dense_output=True)


def angular_profile_oracle(p, N=2, tol=1e-13):
    """Positive solution of omega'' + alpha^2 omega = omega^p on (0, pi), alpha = 2/(p-1),
    omega(0) = omega(pi) = 0, by bisection on omega'(0)."""
    if N != 2:
        raise NotImplementedError("the angular oracle covers N = 2 only")
    if not p > 1:
        raise ValueError("angular profile needs p > 1")
    alpha = 2.0 / (p - 1.0)
    if alpha <= 1.0:
        raise NoPositiveSolutionError(
            f"p = {p:g} >= 3: alpha = {alpha:g} <= 1, no positive solution on (0, pi)"
        )

    def first_zero(slope):
        sol = _shoot(slope, alpha, p)
        if sol.t_events[0].size:
            return sol.t_events[0][0]
        return np.inf

    lo = 1e-3
    if not first_zero(lo) < np.pi:
        raise NoPositiveSolutionError("small-amplitude shot did not return before pi")
    hi = 1.0
    while first_zero(hi) < np.pi:
        hi *= 2.0
        if hi > 1e6:
            raise NoPositiveSolutionError("could not bracket the shooting slope")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if first_zero(mid) < np.pi:
            lo = mid
        else:
            hi = mid
    slope = lo
    sol = _shoot(slope, alpha, p)
    end = sol.t[-1]
    theta = np.linspace(0.0, end, 1001)
    prof = AngularProfile(p, alpha, slope, theta, sol.sol(theta)[0], sol)
    return prof


def sample_singular(grid, func, cfg, origin_value=0.0):
    """Sample a kernel singular only at the origin; the origin node gets ``origin_value``
    (0 is the natural value for x_N-odd kernels)."""
    vals = np.full(grid.n, float(origin_value))
    away = grid.radius > 0
    vals[away] = func(grid.points[away], cfg)
    return grid.field(vals)
