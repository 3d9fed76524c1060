"""Approximation ladders: mollifier/separation t -> 0, truncation n -> inf,
strength k -> inf, and the combined dipole + Dirac variant."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from . import analysis
from .errors import FitError, SolverError
from .grid import Grid
from .kernels import KernelConfig
from .nonlinearity import Nonlinearity, check_subcritical, critical_exponent, truncate
from .solver import SolverSettings, solve_linear, solve_semilinear
from .sources import coupled_source, dipole_field

log = logging.getLogger(__name__)

MODES = ("dipole_only", "combined", "k_limit")
# ordering claims are checked with slack CHECK_SLACK * tol_nl
CHECK_SLACK = 10.0
# cap on automatically appended truncation rungs
MAX_AUTO_LEVELS = 12


def quiet_direction(N):
    """Unit direction with e_N^2 = 3/(N+2).

    Along it the O(t^2) correction of a finite-separation dipole vanishes, so
    coefficient fits at finite t are least biased there.
    """
    eN = math.sqrt(3.0 / (N + 2.0))
    e = np.zeros(N)
    e[0] = math.sqrt(1.0 - eN * eN)
    e[-1] = eN
    return e


def _strictly_monotone(seq, increasing):
    pairs = zip(seq, seq[1:])
    return all((b > a) if increasing else (b < a) for a, b in pairs)


@dataclass
class LadderSpec:
    """Index sets of one experiment.

    ``t_list`` decreases, ``k_list`` and ``n_list`` increase (``inf`` allowed
    as the last truncation level).  With ``auto_n`` the ladder appends
    levels until the cap sits above the solution range.
    """

    g: Nonlinearity
    dimension: int = 2
    M: int = 257
    k_list: tuple = (1.0,)
    j_list: tuple = (0.0,)
    t_list: tuple = (0.25, 0.125, 0.0625)
    n_list: tuple = ()
    mode: str = "dipole_only"
    eps_ratio: float = 0.25
    auto_n: bool = True
    fit_direction: tuple = None
    fit_rmax: float = analysis.FIT_RMAX
    fit_window: tuple = None
    dirac_window: tuple = None
    exponent_window: tuple = (0.2, 0.45)
    angular_radius: float = 0.3
    richardson: bool = False
    workers: int = 1
    settings: SolverSettings = field(default_factory=SolverSettings.from_env)

    def __post_init__(self):
        self.k_list = tuple(float(k) for k in self.k_list)
        self.j_list = tuple(float(j) for j in self.j_list)
        self.t_list = tuple(float(t) for t in self.t_list)
        self.n_list = tuple(float(n) for n in self.n_list)
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown ladder mode {self.mode!r}; choose from {MODES}")
        if not self.t_list or not _strictly_monotone(self.t_list, increasing=False):
            raise ValueError("t schedule must be nonempty and strictly decreasing")
        if not self.k_list or not _strictly_monotone(self.k_list, increasing=True):
            raise ValueError("k schedule must be nonempty and strictly increasing")
        if not _strictly_monotone(self.n_list, increasing=True):
            raise ValueError("n schedule must be strictly increasing")
        if not _strictly_monotone(self.j_list, increasing=True):
            raise ValueError("j schedule must be strictly increasing")
        if self.mode == "combined":
            if any(j <= 0 for j in self.j_list):
                raise ValueError("combined mode needs every j > 0")
        elif any(j != 0 for j in self.j_list):
            raise ValueError(f"{self.mode} mode needs j = 0")
        if any(n < 1 for n in self.n_list):
            raise ValueError("truncation levels must be >= 1")

    @property
    def direction(self):
        if self.fit_direction is None:
            return quiet_direction(self.dimension)
        return analysis.unit(self.fit_direction)

    def to_dict(self):
        return {
            "g": self.g.label, "dimension": self.dimension, "M": self.M,
            "k_list": list(self.k_list), "j_list": list(self.j_list),
            "t_list": list(self.t_list), "n_list": [_num(n) for n in self.n_list],
            "mode": self.mode, "eps_ratio": self.eps_ratio, "auto_n": self.auto_n,
            "fit_direction": self.direction.tolist(), "fit_rmax": self.fit_rmax,
            "fit_window": list(self.fit_window) if self.fit_window else None,
            "dirac_window": list(self.dirac_window) if self.dirac_window else None,
            "exponent_window": list(self.exponent_window),
            "angular_radius": self.angular_radius, "richardson": self.richardson,
            "workers": self.workers, "settings": self.settings.__dict__.copy(),
        }


def _num(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


@dataclass
class Rung:
    k: float
    j: float
    n: float
    t: float
    m: float
    u: object = field(repr=False)
    report: object = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def key(self):
        return (self.k, self.j, self.n, self.t)


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "worst": float(self.worst), "detail": self.detail}


@dataclass
class LadderResult:
    spec: LadderSpec
    grid: Grid = field(repr=False)
    rungs: dict = field(default_factory=dict)
    gaps: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False)

    def merge(self, rungs):
        """Insert rungs keyed by (k, j, n, t); order of insertion is irrelevant."""
        for r in rungs:
            self.rungs[r.key] = r
        self.rungs = dict(sorted(self.rungs.items(), key=_rung_order))

    def final_rungs(self):
        """Last truncation level of each (k, j, t) chain."""
        last = {}
        for (k, j, n, t), r in self.rungs.items():
            key = (k, j, t)
            if key not in last or n > last[key].n:
                last[key] = r
        return dict(sorted(last.items(), key=lambda kv: (kv[0][0], kv[0][1], -kv[0][2])))

    def limit_field(self, k=None, j=None):
        """Finest-t, last-n field for the given (k, j), default the largest."""
        finals = self.final_rungs()
        k = self.spec.k_list[-1] if k is None else k
        j = (self.spec.j_list[-1] if self.spec.j_list else 0.0) if j is None else j
        t = self.spec.t_list[-1]
        return finals[(float(k), float(j), float(t))]

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def gap_for(self, rung):
        """L1 Cauchy gap ending at ``rung``: along t for the last level of a
        chain, along n otherwise (NaN for the first rung of each)."""
        final = self.final_rungs().get((rung.k, rung.j, rung.t)) is rung
        wanted = "t" if final else "n"
        for gap in self.gaps:
            if gap["to"] == rung.key and gap["limit"] == wanted:
                return gap["L1_gap"]
        if final:
            for gap in self.gaps:
                if gap["to"] == rung.key:
                    return gap["L1_gap"]
        return float("nan")

    def table_rows(self):
        rows = []
        for r in self.rungs.values():
            d = r.diagnostics
            rows.append({
                "k": r.k, "j": r.j, "n": _num(r.n), "t": r.t, "m": r.m, "M": self.spec.M,
                "residual": d.get("residual", float("nan")),
                "L1_gap": self.gap_for(r),
                "coeff_dipole": d.get("coeff_dipole", float("nan")),
                "coeff_dirac": d.get("coeff_dirac", float("nan")),
                "exponent_fit": d.get("exponent_fit", float("nan")),
            })
        return rows


def _rung_order(item):
    k, j, n, t = item[0]
    return (k, j, -t, n)


def _upper(grid, values):
    return values[grid.upper]


class _Context:
    def __init__(self, spec):
        self.spec = spec
        self.grid = Grid(spec.dimension, spec.M)
        self.cfg = KernelConfig(spec.dimension)
        self.settings = spec.settings

    def source(self, k, j, t):
        return coupled_source(k, j, t, ratio=self.spec.eps_ratio)

    def rhs(self, src):
        return dipole_field(self.grid, src)

    def slack(self, f):
        return CHECK_SLACK * self.settings.tol_nl_rel * max(f.l2(), 1.0)


def _parts(u):
    """(x_N-odd part, x_N-even part) of a field."""
    mirror = u.values[u.grid.reflection]
    return u.grid.field(0.5 * (u.values - mirror)), u.grid.field(0.5 * (u.values + mirror))


def _diagnostics(ctx, rung, src):
    """Residual, symmetry defect and ray fits of one rung.

    With a Dirac part the dipole coefficient is read from the x_N-odd part
    and the Dirac coefficient from the even part: the leading profiles P_N
    and Gamma_N have those parities, and the raw ratio u / P_N carries an
    O(|x|^(N-1)) cross term from Gamma_N.
    """
    spec, grid, cfg = ctx.spec, ctx.grid, ctx.cfg
    u = rung.u
    odd, even = _parts(u) if rung.j else (u, u)
    d = {"residual": rung.report.final_residual, "odd_defect": analysis.odd_defect(u),
         "max_abs": u.max_abs(), "newton_iterations": rung.report.iterations}
    rmax = max(spec.fit_rmax, spec.exponent_window[1])
    radii = analysis.default_radii(grid, rmax=rmax, count=60)
    rmin = analysis.FIT_RMIN_CELLS * grid.h
    window = spec.fit_window or (max(rmin, 2.0 * src.t), spec.fit_rmax)
    dwindow = spec.dirac_window or (max(rmin, 2.0 * src.radius), spec.fit_rmax)
    fits = []
    d["fits"] = fits
    d["fit_window"] = list(window)
    d["dirac_window"] = list(dwindow)
    try:
        prof = analysis.extract_ray(odd, spec.direction, radii)
        fit = analysis.fit_dipole_coefficient(prof, cfg, window)
        d["coeff_dipole"] = fit.coefficient
        fits.append(("dipole", fit))
    except FitError as exc:
        d["coeff_dipole"] = float("nan")
        d["coeff_dipole_error"] = str(exc)
    try:
        equator = np.zeros(grid.dimension)
        equator[0] = 1.0
        prof = analysis.extract_ray(even, equator, radii)
        fit = analysis.fit_dirac_coefficient(prof, cfg, dwindow)
        d["coeff_dirac"] = fit.coefficient
        fits.append(("dirac", fit))
    except FitError as exc:
        d["coeff_dirac"] = float("nan")
        d["coeff_dirac_error"] = str(exc)
    d["exponent_fit"] = float("nan")
    if spec.mode == "k_limit":
        axis = np.zeros(grid.dimension)
        axis[-1] = 1.0
        try:
            prof = analysis.extract_ray(u, axis, radii)
            fit = analysis.fit_power_law(prof, spec.exponent_window)
            d["exponent_fit"] = fit.exponent
            fits.append(("exponent", fit))
        except FitError as exc:
            d["exponent_fit_error"] = str(exc)
    return d


def _auto_level(g, amplitude):
    """Smallest power of two n with g(amplitude) <= n - 2 (one unit of margin)."""
    top = float(g(np.array(amplitude)))
    return float(2.0 ** math.ceil(math.log2(top + 2.0)))


def _solve_chain(ctx, k, j, t):
    """All truncation levels for one (k, j, t); returns (rungs, linear field, rhs)."""
    spec = ctx.spec
    src = ctx.source(k, j, t)
    f = ctx.rhs(src)
    lin, _ = solve_linear(f, ctx.settings)
    levels = list(spec.n_list) or [math.inf]
    rungs = []
    start = lin
    i = 0
    while i < len(levels):
        n = levels[i]
        gn = truncate(spec.g, n)
        u, rep = solve_semilinear(f, gn, warm_start=start, settings=ctx.settings)
        rung = Rung(k, j, n, t, 1.0 / (4.0 * src.radius), u, rep)
        rung.diagnostics = _diagnostics(ctx, rung, src)
        rung.diagnostics["truncation_inactive"] = gn.inactive_on(u.max_abs())
        rungs.append(rung)
        start = u
        last = i == len(levels) - 1
        if last and spec.auto_n and not rung.diagnostics["truncation_inactive"]:
            if len(levels) - len(spec.n_list) >= MAX_AUTO_LEVELS:
                log.warning("truncation still active after %d automatic levels", MAX_AUTO_LEVELS)
            else:
                nxt = max(_auto_level(spec.g, u.max_abs()), 2.0 * n)
                levels.append(nxt)
        i += 1
    return rungs, lin, f


def _run_chains(ctx, keys):
    """Solve independent (k, j, t) chains, in parallel when workers > 1."""
    workers = max(1, int(ctx.spec.workers))
    if workers == 1:
        out = [_solve_chain(ctx, *key) for key in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda key: _solve_chain(ctx, *key), keys))
    return dict(zip(keys, out))


def _l1_gap(a, b):
    return (a - b).l1()


def _record_gaps(result):
    """L1 Cauchy gaps along n within each chain and along t at the last n."""
    spec = result.spec
    chains = {}
    for r in result.rungs.values():
        chains.setdefault((r.k, r.j, r.t), []).append(r)
    for key in sorted(chains, key=lambda x: (x[0], x[1], -x[2])):
        seq = sorted(chains[key], key=lambda r: r.n)
        for a, b in zip(seq, seq[1:]):
            result.gaps.append({"limit": "n", "from": a.key, "to": b.key,
                                "L1_gap": _l1_gap(b.u, a.u)})
    finals = result.final_rungs()
    for k in spec.k_list:
        for j in spec.j_list or (0.0,):
            seq = [finals[(k, j, t)] for t in spec.t_list if (k, j, t) in finals]
            for a, b in zip(seq, seq[1:]):
                result.gaps.append({"limit": "t", "from": a.key, "to": b.key,
                                    "L1_gap": _l1_gap(b.u, a.u)})


def _check_chain_orderings(ctx, rungs, lin, f, checks):
    """0 <= w_{n} <= k G_h[mu] and w_{n+1} <= w_n on the upper half-grid."""
    grid = ctx.grid
    tol = ctx.slack(f)
    seq = sorted(rungs, key=lambda r: r.n)
    tag = f"k={seq[0].k:g},j={seq[0].j:g},t={seq[0].t:g}"
    if seq[0].j == 0:
        low = min(float(np.min(_upper(grid, r.u.values))) for r in seq)
        high = max(float(np.max(_upper(grid, r.u.values - lin.values))) for r in seq)
        checks.append(Check(f"barrier_lower[{tag}]", low >= -tol, -low))
        checks.append(Check(f"barrier_upper[{tag}]", high <= tol, high))
    worst = 0.0
    for a, b in zip(seq, seq[1:]):
        worst = max(worst, float(np.max(_upper(grid, b.u.values - a.u.values))))
    if len(seq) > 1:
        checks.append(Check(f"n_monotone[{tag}]", worst <= tol, worst,
                            "w_(n+1) <= w_n on x_N > 0"))


def _check_k_monotone(ctx, result, j, checks):
    grid = ctx.grid
    finals = result.final_rungs()
    for t in ctx.spec.t_list:
        seq = [finals[(k, j, t)] for k in ctx.spec.k_list if (k, j, t) in finals]
        worst = 0.0
        for a, b in zip(seq, seq[1:]):
            worst = max(worst, float(np.max(_upper(grid, a.u.values - b.u.values))))
        if len(seq) > 1:
            tol = CHECK_SLACK * ctx.settings.tol_nl_rel * max(
                ctx.rhs(ctx.source(seq[-1].k, j, t)).l2(), 1.0)
            checks.append(Check(f"k_monotone[j={j:g},t={t:g}]", worst <= tol, worst,
                                "w_(k+1) >= w_k on x_N > 0"))


def _richardson(result):
    """First-order extrapolation in t of the last two final fields: 2 u(t/2) - u(t)."""
    spec = result.spec
    if len(spec.t_list) < 2:
        return
    finals = result.final_rungs()
    out = {}
    for k in spec.k_list:
        for j in spec.j_list or (0.0,):
            a = finals.get((k, j, spec.t_list[-2]))
            b = finals.get((k, j, spec.t_list[-1]))
            if a is None or b is None:
                continue
            ratio = spec.t_list[-2] / spec.t_list[-1]
            out[(k, j)] = (ratio * b.u - a.u) * (1.0 / (ratio - 1.0))
    result.extras["richardson"] = out


def _summarize(result):
    spec = result.spec
    finals = result.final_rungs()
    s = {"targets": {}, "finest": {}}
    for (k, j, t), r in finals.items():
        if t != spec.t_list[-1]:
            continue
        label = f"k={k:g},j={j:g}"
        s["targets"][label] = {"coeff_dipole": 2.0 * k, "coeff_dirac": j}
        if spec.mode == "k_limit":
            s["targets"][label]["exponent"] = 2.0 / (spec.g.p - 1.0)
        s["finest"][label] = {key: r.diagnostics.get(key) for key in
                              ("coeff_dipole", "coeff_dirac", "exponent_fit", "odd_defect",
                               "residual", "max_abs")}
        s["finest"][label]["n"] = _num(r.n)
    result.summary.update(s)


def run_dipole_ladder(spec, check_subcritical_g=True):
    """Solve -Lap u + g_n(u) = k mu_{t, m(t)} over the (k, n, t) schedule.

    Checks on the upper half-grid: 0 <= w <= k G_h[mu_t], w_(n+1) <= w_n and
    w_(k+1) >= w_k.  The limit field is the finest-t rung at the last
    (inactive) truncation level.
    """
    if spec.mode == "combined":
        raise ValueError("run_dipole_ladder needs j = 0; use run_combined_ladder")
    if check_subcritical_g:
        sub = check_subcritical(spec.g, spec.dimension)
        if not sub["converges"]:
            raise ValueError(
                f"{spec.g.label} is not subcritical in dimension {spec.dimension} "
                f"(critical exponent {sub['critical_exponent']:g})"
            )
    ctx = _Context(spec)
    result = LadderResult(spec, ctx.grid)
    keys = [(k, 0.0, t) for k in spec.k_list for t in spec.t_list]
    chains = _run_chains(ctx, keys)
    for key in keys:
        rungs, lin, f = chains[key]
        result.merge(rungs)
        _check_chain_orderings(ctx, rungs, lin, f, result.checks)
        result.extras.setdefault("linear", {})[key] = lin
    _check_k_monotone(ctx, result, 0.0, result.checks)
    for r in result.final_rungs().values():
        tol = ctx.slack(ctx.rhs(ctx.source(r.k, 0.0, r.t)))
        result.checks.append(Check(f"odd[k={r.k:g},t={r.t:g}]",
                                   r.diagnostics["odd_defect"] <= tol,
                                   r.diagnostics["odd_defect"]))
    _record_gaps(result)
    if spec.richardson:
        _richardson(result)
    _summarize(result)
    return result


def run_combined_ladder(spec, dipole=None):
    """Dipole plus Dirac source; checks w <= v <= w + j G_h[sigma] node-wise.

    ``dipole`` is a finished dipole-only LadderResult on the same grid and
    schedules; it is computed when omitted.
    """
    if spec.mode != "combined":
        raise ValueError("run_combined_ladder needs mode 'combined' (j > 0)")
    ctx = _Context(spec)
    if dipole is None:
        dspec = replace(spec, mode="dipole_only", j_list=(0.0,))
        dipole = run_dipole_ladder(dspec, check_subcritical_g=False)
    result = LadderResult(spec, ctx.grid)
    result.extras["dipole"] = dipole
    dfinal = dipole.final_rungs()
    keys = [(k, j, t) for k in spec.k_list for j in spec.j_list for t in spec.t_list]
    # pin the truncation level to the dipole chain's so both sides see the same g_n
    chains = {}
    for key in keys:
        k, j, t = key
        w = dfinal[(k, 0.0, t)]
        chains[key] = _combined_chain(ctx, k, j, t, w)
    for key in keys:
        rungs, lin, f = chains[key]
        result.merge(rungs)
        _check_chain_orderings(ctx, rungs, lin, f, result.checks)
    _check_k_monotone(ctx, result, spec.j_list[-1], result.checks)
    for key in keys:
        k, j, t = key
        v = result.final_rungs()[key]
        w = dfinal[(k, 0.0, t)]
        src = ctx.source(0.0, 1.0, t)
        pot, _ = solve_linear(ctx.rhs(src), ctx.settings)
        tol = ctx.slack(ctx.rhs(ctx.source(k, j, t)))
        lower = float(np.max(w.u.values - v.u.values))
        upper = float(np.max(v.u.values - w.u.values - j * pot.values))
        tag = f"k={k:g},j={j:g},t={t:g}"
        result.checks.append(Check(f"sandwich_lower[{tag}]", lower <= tol, lower, "w <= v"))
        result.checks.append(Check(f"sandwich_upper[{tag}]", upper <= tol, upper,
                                   "v <= w + j G_h[sigma]"))
        v.diagnostics["sandwich_lower"] = lower
        v.diagnostics["sandwich_upper"] = upper
    _record_gaps(result)
    if spec.richardson:
        _richardson(result)
    _summarize(result)
    return result


def _combined_chain(ctx, k, j, t, w):
    spec = ctx.spec
    src = ctx.source(k, j, t)
    f = ctx.rhs(src)
    lin, _ = solve_linear(f, ctx.settings)
    gn = truncate(spec.g, w.n)
    u, rep = solve_semilinear(f, gn, warm_start=lin, settings=ctx.settings)
    rung = Rung(k, j, w.n, t, w.m, u, rep)
    rung.diagnostics = _diagnostics(ctx, rung, src)
    rung.diagnostics["truncation_inactive"] = gn.inactive_on(u.max_abs())
    return [rung], lin, f


def _lambda_hat(ctx, u, p, rmin, rmax):
    grid = ctx.grid
    sel = (grid.radius >= rmin) & (grid.radius <= rmax)
    return float(np.max(np.abs(u.values[sel]) * grid.radius[sel] ** (2.0 / (p - 1.0))))


def angular_shape(u, radius, thetas):
    """u at radius * (cos th, sin th), normalized by its maximum over ``thetas``."""
    pts = np.stack([np.cos(thetas), np.sin(thetas)], axis=-1) * radius
    from scipy.interpolate import RegularGridInterpolator

    grid = u.grid
    interp = RegularGridInterpolator((grid.axis,) * 2, u.full(), method="linear")
    vals = interp(pts)
    return vals / np.max(vals)


def run_k_limit(spec, K=None):
    """Dipole ladder over k = 1, 2, 4, ..., then power-law and angular diagnostics.

    λ̂_k = max |w_k| |x|^{2/(p-1)} over the exponent window is reported per k.
    """
    g = spec.g
    if g.kind != "power" or not 1.0 < g.p < critical_exponent(spec.dimension):
        raise ValueError("k-limit needs a power nonlinearity with 1 < p < (N+1)/(N-1)")
    if K is not None:
        spec = replace(spec, k_list=tuple(2.0 ** i for i in range(K + 1)))
    spec = replace(spec, mode="k_limit")
    result = run_dipole_ladder(spec)
    ctx = _Context(spec)
    finals = result.final_rungs()
    t = spec.t_list[-1]
    lo, hi = spec.exponent_window
    lam = {k: _lambda_hat(ctx, finals[(k, 0.0, t)].u, g.p, lo, hi) for k in spec.k_list}
    result.summary["lambda_hat"] = {f"{k:g}": v for k, v in lam.items()}
    ks = list(spec.k_list)
    if len(ks) > 1:
        growth = lam[ks[-1]] / lam[ks[-2]]
        result.summary["lambda_hat_growth"] = growth
        # k doubles between rungs; a saturating bound grows by much less
        result.checks.append(Check("lambda_hat_saturating",
                                   bool(np.isfinite(growth) and growth < 1.5), growth))
    top = finals[(ks[-1], 0.0, t)]
    result.summary["exponent_fit"] = top.diagnostics.get("exponent_fit")
    result.summary["exponent_target"] = 2.0 / (g.p - 1.0)
    if spec.dimension == 2 and g.p < 3.0:
        try:
            prof = analysis.angular_profile_oracle(g.p)
            theta = np.linspace(0.2, np.pi - 0.2, 121)
            ref = prof(theta) / np.max(prof(theta))
            shape = angular_shape(top.u, spec.angular_radius, theta)
            dist = float(np.max(np.abs(shape - ref)))
            result.summary["angular_sup_distance"] = dist
            result.extras["omega"] = prof
            result.extras["angular"] = (theta, shape, ref)
        except Exception as exc:  # reported, not fatal
            result.summary["angular_error"] = str(exc)
    return result


def run_supercritical_contrast(spec, control_p=None):
    """Same dipole ladder with no subcriticality precondition.

    Records the fitted coefficient per t-rung and whether it is nonincreasing;
    nothing is asserted about the limit value.
    """
    spec = replace(spec, mode="dipole_only")
    result = run_dipole_ladder(spec, check_subcritical_g=False)
    finals = result.final_rungs()
    seq = {}
    for k in spec.k_list:
        coeffs = [finals[(k, 0.0, t)].diagnostics["coeff_dipole"] for t in spec.t_list]
        seq[f"{k:g}"] = {
            "t": list(spec.t_list),
            "coeff_dipole": coeffs,
            "ratio_to_2k": [c / (2.0 * k) for c in coeffs],
            "nonincreasing": bool(all(b <= a for a, b in zip(coeffs, coeffs[1:]))),
        }
    result.summary["contrast"] = seq
    if control_p is not None:
        from .nonlinearity import power

        control = run_dipole_ladder(replace(spec, g=power(control_p)), check_subcritical_g=False)
        result.extras["control"] = control
        cf = control.final_rungs()
        result.summary["control"] = {
            f"{k:g}": [cf[(k, 0.0, t)].diagnostics["coeff_dipole"] for t in spec.t_list]
            for k in spec.k_list
        }
    return result


def warm_start_check(result, count=3):
    """Re-solve up to ``count`` rungs cold; max node difference vs the warm-started fields."""
    spec = result.spec
    ctx = _Context(spec)
    picked = list(result.rungs.values())[-count:]
    worst = 0.0
    for r in picked:
        f = ctx.rhs(ctx.source(r.k, r.j, r.t))
        u, _ = solve_semilinear(f, truncate(spec.g, r.n), settings=ctx.settings)
        diff = float(np.max(np.abs(u.values - r.u.values)))
        worst = max(worst, diff)
        tol = ctx.slack(f)
    check = Check("warm_start_invariance", worst <= tol, worst)
    result.checks.append(check)
    return check


__all__ = [
    "LadderSpec", "LadderResult", "Rung", "Check", "quiet_direction", "run_dipole_ladder",
    "run_combined_ladder", "run_k_limit", "run_supercritical_contrast", "warm_start_check",
    "angular_shape", "SolverError",
]
