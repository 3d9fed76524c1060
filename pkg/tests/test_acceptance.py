"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import time

import numpy as np
import pytest

from anisolab import analysis as an, cli
from anisolab.grid import Grid
from anisolab.kernels import KernelConfig, dipole_green
from anisolab.ladder import (
    LadderSpec, run_combined_ladder, run_dipole_ladder, run_k_limit, run_supercritical_contrast,
)
from anisolab.nonlinearity import power, zero
from anisolab.selftest import kernel_selftest
from anisolab.solver import solve_linear
from anisolab.sources import coupled_source, dipole_field


@pytest.fixture
def verdict(capsys):
    """Print one line per criterion (bypassing capture), then assert."""

    def report(number, title, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = (f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title}: {detail} "
                f"[{elapsed:.1f} s, limit {limit:.0f} s]")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def test_criterion_1_kernel_selftest(verdict):
    t0 = time.perf_counter()
    res = kernel_selftest(2, 129)
    elapsed = time.perf_counter() - t0
    ok = res["symmetry_defect"] <= 1e-12 and min(res["dq_orders"]) >= 1.9
    verdict(1, "kernel self-test", ok,
            f"symmetry defect {res['symmetry_defect']:.2e}, difference-quotient orders "
            + ", ".join(f"{o:.3f}" for o in res["dq_orders"]), elapsed, 10)


def _manufactured(p):
    x, y = p[:, 0], p[:, 1]
    S = np.sin(np.pi * x) * np.sin(np.pi * y)
    w = 1 - x * x - y * y
    f = (2 * np.pi ** 2 * w * S + 4 * S
         + 4 * np.pi * (x * np.cos(np.pi * x) * np.sin(np.pi * y)
                        + y * np.sin(np.pi * x) * np.cos(np.pi * y)))
    return w * S, f


def test_criterion_2_discretization_order(verdict):
    t0 = time.perf_counter()
    errs = []
    for M in (65, 129, 257):
        g = Grid(2, M)
        exact, f = _manufactured(g.points)
        u, _ = solve_linear(g.field(f))
        errs.append(np.max(np.abs(u.values - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    elapsed = time.perf_counter() - t0
    verdict(2, "manufactured-solution order", min(orders) >= 1.8,
            "sup errors " + ", ".join(f"{e:.2e}" for e in errs)
            + "; orders " + ", ".join(f"{o:.3f}" for o in orders), elapsed, 60)


def test_criterion_3_linear_dipole_recovery(verdict):
    t0 = time.perf_counter()
    res = run_dipole_ladder(LadderSpec(g=zero(), M=257, t_list=(0.25, 0.125, 0.0625)))
    c = res.limit_field().diagnostics["coeff_dipole"]
    elapsed = time.perf_counter() - t0
    verdict(3, "linear dipole coefficient", abs(c - 2) <= 0.05 * 2,
            f"fitted {c:.4f} vs 2 (tol 5%)", elapsed, 120)


def test_criterion_4_subcritical_nonlinear(verdict):
    t0 = time.perf_counter()
    spec = LadderSpec(g=power(2.0), M=257, t_list=(0.25, 0.125, 0.0625), n_list=(2, 4))
    res = run_dipole_ladder(spec)
    rung = res.limit_field()
    d = rung.diagnostics
    src = coupled_source(1, 0, rung.t)
    f = dipole_field(res.grid, src)
    tol_nl = spec.settings.tol_nl_rel * f.l2()
    barrier = [c for c in res.checks if c.name.startswith("barrier")]
    xi = an.PolyTestFunction(0.0, 1.0, 1.0)
    ident = an.identity_residual(rung.u, power(2.0), src, (xi,))[0] / (2 * 1 * xi.dN_at_origin)
    elapsed = time.perf_counter() - t0
    ok = (abs(d["coeff_dipole"] - 2) <= 0.10 * 2 and d["odd_defect"] <= 10 * tol_nl
          and all(c.passed for c in barrier) and ident <= 0.05)
    verdict(4, "subcritical p=2", ok,
            f"coefficient {d['coeff_dipole']:.4f} (tol 10%), odd defect {d['odd_defect']:.1e} "
            f"<= {10 * tol_nl:.1e}, barrier checks {sum(c.passed for c in barrier)}/"
            f"{len(barrier)}, identity residual {100 * ident:.2f}%", elapsed, 600)


def test_criterion_5_combined_source_3d(verdict):
    t0 = time.perf_counter()
    h = 2.0 / 96
    spec = LadderSpec(g=power(1.5), dimension=3, M=97, k_list=(1.0,), j_list=(1.0,),
                      t_list=(0.25, 0.125), eps_ratio=1.0 / 3.0, mode="combined",
                      fit_rmax=0.4, dirac_window=(3 * h, 6 * h))
    res = run_combined_ladder(spec)
    d = res.limit_field().diagnostics
    sandwich = [c for c in res.checks if c.name.startswith("sandwich")]
    elapsed = time.perf_counter() - t0
    ok = (all(c.passed for c in sandwich) and abs(d["coeff_dirac"] - 1) <= 0.15
          and abs(d["coeff_dipole"] - 2) <= 0.15 * 2)
    verdict(5, "combined source N=3", ok,
            f"sandwich {sum(c.passed for c in sandwich)}/{len(sandwich)} (worst "
            f"{max(c.worst for c in sandwich):.1e}), Dirac {d['coeff_dirac']:.4f} vs 1, "
            f"dipole {d['coeff_dipole']:.4f} vs 2 (tol 15%)", elapsed, 900)


def test_criterion_6_k_limit(verdict):
    t0 = time.perf_counter()
    res = run_k_limit(LadderSpec(g=power(2.0), M=257, t_list=(0.0625,)), K=6)
    mono = [c for c in res.checks if c.name.startswith("k_monotone")]
    e = res.summary["exponent_fit"]
    dist = res.summary["angular_sup_distance"]
    elapsed = time.perf_counter() - t0
    ok = all(c.passed for c in mono) and abs(e - 2) <= 0.15 * 2 and dist <= 0.15
    verdict(6, "k-limit p=2, k=1..64", ok,
            f"k-monotone {all(c.passed for c in mono)}, exponent {e:.4f} vs 2 (tol 15%), "
            f"angular sup distance {dist:.4f} (tol 0.15)", elapsed, 1200)


def test_criterion_7_critical_exponent_contrast(verdict):
    t0 = time.perf_counter()
    k = 4.0
    spec = LadderSpec(g=power(3.5), M=1025, k_list=(k,), t_list=(1 / 16, 1 / 32, 1 / 64))
    res = run_supercritical_contrast(spec, control_p=2.0)
    row = res.summary["contrast"][f"{k:g}"]
    control = res.summary["control"][f"{k:g}"]
    elapsed = time.perf_counter() - t0
    ok = (control[-1] >= 0.9 * 2 * k and row["nonincreasing"]
          and row["ratio_to_2k"][-1] < 0.5)
    verdict(7, "critical-exponent contrast", ok,
            f"control p=2 coefficient/2k {control[-1] / (2 * k):.3f} (>= 0.9); p=3.5 "
            "coefficient/2k per rung " + ", ".join(f"{r:.3f}" for r in row["ratio_to_2k"])
            + " (nonincreasing, final < 0.5)", elapsed, 900)


def test_criterion_8_weak_norms(verdict):
    t0 = time.perf_counter()
    cfg = KernelConfig(2)
    vals = {}
    for M in (129, 257):
        u = an.sample_singular(Grid(2, M), dipole_green, cfg)
        vals[M] = (an.weak_norm(u, 2.0, "dx").value, an.weak_norm(u, 3.0, "|x|dx").value)
    changes = [abs(vals[257][i] - vals[129][i]) / vals[257][i] for i in range(2)]
    elapsed = time.perf_counter() - t0
    verdict(8, "weak norms of dipole_green", max(changes) < 0.10,
            f"M^2(dx) {vals[129][0]:.4f} -> {vals[257][0]:.4f}, "
            f"M^3(|x|dx) {vals[129][1]:.4f} -> {vals[257][1]:.4f}; changes "
            + ", ".join(f"{100 * c:.2f}%" for c in changes), elapsed, 120)


INVARIANT_CONFIG = """\
mode = dipole
dimension = 2
M = 257
nonlinearity = power:2
k = 1, 2
t = 0.125, 0.0625
n = 2, 4
dump_fields = none
"""


def test_criterion_9_invariant_suite(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "invariants.cfg"
    cfg.write_text(INVARIANT_CONFIG)
    out = tmp_path / "out"
    code = cli.main(["run", str(cfg), "--strict", "--output-dir", str(out)])
    m = json.loads((out / "manifest.json").read_text())
    enabled = [a for a in m["assertions"] if a["enabled"]]
    groups = {
        "comparison": [a for a in enabled if a["name"].startswith(("barrier", "k_monotone"))],
        "truncation": [a for a in enabled if a["name"].startswith("n_monotone")],
        "double_start": [a for a in enabled if a["name"].startswith("warm_start")],
        "determinism": [a for a in enabled if a["name"].startswith("determinism")],
    }
    elapsed = time.perf_counter() - t0
    ok = code == 0 and all(g and all(a["passed"] for a in g) for g in groups.values())
    verdict(9, "invariant suite under --strict", ok,
            f"exit {code}; " + ", ".join(
                f"{name} {sum(a['passed'] for a in g)}/{len(g)}" for name, g in groups.items()),
            elapsed, 600)
