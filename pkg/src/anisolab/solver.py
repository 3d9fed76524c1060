"""Discrete -Laplace, linear CG solves and the damped Newton semilinear solve."""
from dataclasses import asdict, dataclass, field
import logging
import os
import threading

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .errors import SolverError
from .grid import ScalarField, discrete_l2
from .nonlinearity import TruncatedNonlinearity, untruncated

log = logging.getLogger(__name__)

ENV_PREFIX = "ANISOLAB_"
# pyamg draws spectral-radius start vectors from the global numpy RNG
_AMG_SEED = 0
_AMG_LOCK = threading.Lock()


@dataclass
class SolverSettings:
    """Tolerances and caps; every field can be overridden by ANISOLAB_<NAME>."""

    tol_linear: float = 1e-10
    tol_nl_rel: float = 1e-9
    max_cg: int = 10_000
    max_newton: int = 60
    max_backtracks: int = 30
    preconditioner: str = "amg"
    monotone_fallback: bool = True
    max_monotone: int = 2000

    @classmethod
    def from_env(cls, **overrides):
        s = cls(**overrides)
        for name, default in asdict(cls()).items():
            raw = os.environ.get(ENV_PREFIX + name.upper())
            if raw is None or name in overrides:
                continue
            kind = type(default)
            if kind is bool:
                setattr(s, name, raw.strip().lower() in ("1", "true", "yes", "on"))
            else:
                setattr(s, name, kind(raw))
        return s


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    linear_solver_stats: list = field(default_factory=list)
    method: str = "newton"
    tolerance: float = 0.0
    message: str = ""

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else 0.0

    def to_dict(self):
        return asdict(self)


def laplacian_apply(u):
    """-Laplace_h u with zero Dirichlet data (the sign makes it positive definite)."""
    return u.grid.field(u.grid.operator @ u.values)


def _preconditioner(J, kind):
    if kind == "amg":
        with _AMG_LOCK:
            state = np.random.get_state()
            np.random.seed(_AMG_SEED)
            try:
                ml = pyamg.smoothed_aggregation_solver(J, max_coarse=500)
            finally:
                np.random.set_state(state)
        return ml.aspreconditioner(cycle="V")
    if kind == "jacobi":
        inv = 1.0 / J.diagonal()
        return LinearOperator(J.shape, matvec=lambda x: inv * x, dtype=float)
    if kind in (None, "none"):
        return None
    raise ValueError(f"unknown preconditioner {kind!r}")


def _pcg(J, b, settings, x0=None, rtol=None):
    """Preconditioned CG; returns (x, iterations)."""
    if not np.any(b):
        return np.zeros_like(b), 0
    count = [0]

    def tick(_):
        count[0] += 1

    M = _preconditioner(J, settings.preconditioner)
    x, info = cg(
        J, b, x0=x0, rtol=settings.tol_linear if rtol is None else rtol,
        atol=0.0, maxiter=settings.max_cg, M=M, callback=tick,
    )
    if info != 0:
        raise SolverError(f"CG did not converge in {settings.max_cg} iterations (info={info})")
    return x, count[0]


def solve_linear(f, settings=None):
    """Solve -Laplace_h u = f, u = 0 on the sphere, by preconditioned CG."""
    settings = settings or SolverSettings.from_env()
    grid = f.grid
    A = grid.operator
    report = SolveReport(method="cg", tolerance=settings.tol_linear)
    if not np.any(f.values):
        report.converged = True
        report.residual_history = [0.0]
        return grid.field(), report
    x, its = _pcg(A, f.values, settings)
    res = discrete_l2(grid, A @ x - f.values)
    report.iterations = its
    report.linear_solver_stats = [its]
    report.residual_history = [res]
    report.converged = res <= settings.tol_linear * discrete_l2(grid, f.values) * 10
    return grid.field(x), report


def _as_truncated(g):
    return g if isinstance(g, TruncatedNonlinearity) else untruncated(g)


def solve_semilinear(f, g, warm_start=None, settings=None, method="newton"):
    """Solve -Laplace_h u + g(u) = f with zero Dirichlet data.

    Damped Newton: J(u) d = -F(u), J = -Laplace_h + diag(g'(u)), solved by PCG,
    with Armijo backtracking on ||F||.  Stops when ||F|| <= tol_nl_rel ||f||.
    ``method="monotone"`` runs the sub/super-solution iteration instead; Newton
    falls back to it on stagnation when ``settings.monotone_fallback`` is set.
    """
    settings = settings or SolverSettings.from_env()
    g = _as_truncated(g)
    grid = f.grid
    if g.is_zero:
        return solve_linear(f, settings)
    if not np.any(f.values) and (warm_start is None or not np.any(warm_start.values)):
        report = SolveReport(converged=True, residual_history=[0.0], method=method,
                             message="zero source")
        return grid.field(), report
    if method == "monotone":
        return _monotone(f, g, warm_start, settings)
    try:
        return _newton(f, g, warm_start, settings)
    except SolverError as exc:
        if not settings.monotone_fallback:
            raise
        log.warning("Newton failed (%s); switching to monotone iteration", exc)
        start = exc.report_state if hasattr(exc, "report_state") else warm_start
        u, rep = _monotone(f, g, start, settings)
        rep.message = f"monotone fallback after: {exc}"
        return u, rep


def _newton(f, g, warm_start, settings):
    grid = f.grid
    A = grid.operator
    b = f.values
    tol = settings.tol_nl_rel * discrete_l2(grid, b)
    u = np.zeros(grid.n) if warm_start is None else warm_start.values.copy()
    F = A @ u + g(u) - b
    r = discrete_l2(grid, F)
    report = SolveReport(method="newton", tolerance=tol, residual_history=[r])
    for it in range(settings.max_newton):
        if r <= tol:
            report.converged = True
            break
        J = (A + sp.diags(g.prime(u))).tocsr()
        d, its = _pcg(J, -F, settings)
        report.linear_solver_stats.append(its)
        lam = 1.0
        for _ in range(settings.max_backtracks):
            trial = u + lam * d
            F_trial = A @ trial + g(trial) - b
            r_trial = discrete_l2(grid, F_trial)
            if np.isfinite(r_trial) and r_trial <= (1.0 - 1e-4 * lam) * r:
                break
            lam *= 0.5
        else:
            report.iterations = it
            exc = SolverError(f"Newton stagnated at residual {r:.3e} (tol {tol:.3e})", report)
            exc.report_state = grid.field(u)
            raise exc
        u, F, r = trial, F_trial, r_trial
        report.residual_history.append(r)
        report.iterations = it + 1
    else:
        report.converged = r <= tol
    if not report.converged:
        exc = SolverError(f"Newton hit {settings.max_newton} steps at residual {r:.3e}", report)
        exc.report_state = grid.field(u)
        raise exc
    return grid.field(u), report


def _monotone(f, g, warm_start, settings):
    """u <- (A + c)^{-1} (f + c u - g(u)) with c >= sup g' over the iterate range."""
    grid = f.grid
    A = grid.operator
    b = f.values
    tol = settings.tol_nl_rel * discrete_l2(grid, b)
    if warm_start is None:
        # the linear solution bounds |u| on each half, so it caps the slope
        u, _ = _pcg(A, b, settings)
    else:
        u = warm_start.values.copy()
    bound = np.max(np.abs(u))
    c = float(np.max(g.prime(np.linspace(0.0, bound, 2001))))
    J = (A + c * sp.identity(grid.n)).tocsr()
    report = SolveReport(method="monotone", tolerance=tol)
    for it in range(settings.max_monotone):
        F = A @ u + g(u) - b
        r = discrete_l2(grid, F)
        report.residual_history.append(r)
        if r <= tol:
            report.converged = True
            break
        u, its = _pcg(J, b + c * u - g(u), settings, x0=u)
        report.linear_solver_stats.append(its)
        report.iterations = it + 1
    if not report.converged:
        raise SolverError(f"monotone iteration hit {settings.max_monotone} steps", report)
    return grid.field(u), report


def residual(u, g, f):
    """Discrete l2 norm of -Laplace_h u + g(u) - f."""
    g = _as_truncated(g)
    grid = u.grid
    return discrete_l2(grid, grid.operator @ u.values + g(u.values) - f.values)
