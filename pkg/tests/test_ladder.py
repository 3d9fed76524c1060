import math

import numpy as np
import pytest

from anisolab import analysis as an
from anisolab.grid import Grid
from anisolab.kernels import KernelConfig
from anisolab.ladder import (
    LadderSpec, quiet_direction, run_combined_ladder, run_dipole_ladder, run_k_limit,
    run_supercritical_contrast, warm_start_check,
)
from anisolab.nonlinearity import power, truncate, zero
from anisolab.solver import solve_linear, solve_semilinear
from anisolab.sources import coupled_source, dipole_field


@pytest.fixture(scope="module")
def p2_ladder():
    return run_dipole_ladder(LadderSpec(g=power(2.0), M=257, n_list=(2, 4)))


def test_quiet_direction_cancels_second_order_term():
    # finite-separation dipole of the free kernel against its limit 2 P_N
    for N in (2, 3):
        cfg = KernelConfig(N)
        from anisolab.kernels import dipole_kernel, gamma
        e = quiet_direction(N)
        assert np.linalg.norm(e) == pytest.approx(1.0)
        t, r = 0.05, 0.3
        x = r * e
        y = np.zeros(N)
        y[-1] = t
        ratio = (gamma(x - y, cfg) - gamma(x + y, cfg)) / t / dipole_kernel(x, cfg)
        axis = np.zeros(N)
        axis[-1] = r
        ratio_axis = (gamma(axis - y, cfg) - gamma(axis + y, cfg)) / t / dipole_kernel(axis, cfg)
        assert abs(ratio - 2) < 0.05 * abs(ratio_axis - 2)


def test_spec_validation():
    with pytest.raises(ValueError):
        LadderSpec(g=power(2.0), t_list=(0.1, 0.2))
    with pytest.raises(ValueError):
        LadderSpec(g=power(2.0), k_list=(2, 1))
    with pytest.raises(ValueError):
        LadderSpec(g=power(2.0), mode="combined", j_list=(0.0,))
    with pytest.raises(ValueError):
        LadderSpec(g=power(2.0), j_list=(1.0,))
    with pytest.raises(ValueError):
        LadderSpec(g=power(2.0), n_list=(4, 2))
    with pytest.raises(ValueError):
        LadderSpec(g=power(2.0), mode="bogus")
    with pytest.raises(ValueError):
        run_dipole_ladder(LadderSpec(g=power(3.0), M=33, t_list=(0.25,)))


def test_zero_nonlinearity_rung_equals_linear_solve():
    res = run_dipole_ladder(LadderSpec(g=zero(), M=129, t_list=(0.25, 0.125)))
    g = Grid(2, 129)
    for t in (0.25, 0.125):
        lin, _ = solve_linear(dipole_field(g, coupled_source(1, 0, t)))
        rung = res.final_rungs()[(1.0, 0.0, t)]
        np.testing.assert_allclose(rung.u.values, lin.values, atol=1e-12)


def test_p2_ladder_invariants(p2_ladder):
    assert p2_ladder.passed
    names = {c.name.split("[")[0] for c in p2_ladder.checks}
    assert {"barrier_lower", "barrier_upper", "n_monotone", "odd"} <= names
    # every consecutive pair has a recorded gap
    t_gaps = [g for g in p2_ladder.gaps if g["limit"] == "t"]
    assert len(t_gaps) == 2


def test_cauchy_gaps_shrink_along_t(p2_ladder):
    t_gaps = [g["L1_gap"] for g in p2_ladder.gaps if g["limit"] == "t"]
    assert t_gaps[0] / t_gaps[1] >= 1.5


def test_truncation_inactive_levels_agree(p2_ladder):
    finals = p2_ladder.final_rungs()
    for rung in finals.values():
        assert rung.diagnostics["truncation_inactive"]
        u = rung.u
        f = dipole_field(u.grid, coupled_source(rung.k, 0, rung.t))
        other, _ = solve_semilinear(f, truncate(power(2.0), 2 * rung.n), warm_start=u)
        assert np.max(np.abs(other.values - u.values)) < 1e-9


def test_finest_rung_coefficient_and_identity(p2_ladder):
    rung = p2_ladder.limit_field()
    assert rung.diagnostics["coeff_dipole"] == pytest.approx(2.0, rel=0.10)
    res = an.identity_residual(rung.u, power(2.0), coupled_source(1, 0, rung.t))
    assert res[0] <= 0.05 * 2.0


def test_table_rows_and_summary(p2_ladder):
    rows = p2_ladder.table_rows()
    assert len(rows) == len(p2_ladder.rungs)
    assert set(rows[0]) == {"k", "j", "n", "t", "m", "M", "residual", "L1_gap",
                            "coeff_dipole", "coeff_dirac", "exponent_fit"}
    assert math.isnan(rows[0]["L1_gap"])
    assert "k=1,j=0" in p2_ladder.summary["finest"]


def test_warm_start_invariance(p2_ladder):
    assert warm_start_check(p2_ladder).passed


def test_k_monotone_and_parallel_workers_match():
    spec = LadderSpec(g=power(2.0), M=129, k_list=(1, 2, 4), t_list=(0.25, 0.125))
    serial = run_dipole_ladder(spec)
    spec.workers = 2
    parallel = run_dipole_ladder(spec)
    assert serial.passed
    assert any(c.name.startswith("k_monotone") for c in serial.checks)
    assert list(serial.rungs) == list(parallel.rungs)
    for key in serial.rungs:
        np.testing.assert_array_equal(serial.rungs[key].u.values, parallel.rungs[key].u.values)


def test_merge_is_order_independent(p2_ladder):
    from anisolab.ladder import LadderResult

    rungs = list(p2_ladder.rungs.values())
    a = LadderResult(p2_ladder.spec, p2_ladder.grid)
    a.merge(rungs[::-1])
    b = LadderResult(p2_ladder.spec, p2_ladder.grid)
    b.merge(rungs[:3])
    b.merge(rungs[3:])
    assert list(a.rungs) == list(b.rungs) == list(p2_ladder.rungs)


def test_richardson_extrapolation_is_recorded():
    res = run_dipole_ladder(LadderSpec(g=zero(), M=65, t_list=(0.5, 0.25), richardson=True))
    ext = res.extras["richardson"][(1.0, 0.0)]
    finals = res.final_rungs()
    expect = 2 * finals[(1.0, 0.0, 0.25)].u.values - finals[(1.0, 0.0, 0.5)].u.values
    np.testing.assert_allclose(ext.values, expect)


def combined_spec(j_list, k_list=(1.0,), M=129):
    return LadderSpec(g=power(2.0), M=M, k_list=k_list, j_list=j_list,
                      t_list=(0.25, 0.125), mode="combined")


def test_combined_sandwich_and_small_j_continuity():
    res = run_combined_ladder(combined_spec((0.05, 0.1, 0.2)))
    assert res.passed
    dip = res.extras["dipole"].final_rungs()
    finals = res.final_rungs()
    t = 0.125
    gaps = [(finals[(1.0, j, t)].u - dip[(1.0, 0.0, t)].u).l1() / j for j in (0.05, 0.1, 0.2)]
    # ||v_j - w|| <= C j with a stable C
    assert max(gaps) / min(gaps) < 1.5
    for j in (0.05, 0.1, 0.2):
        v = finals[(1.0, j, t)]
        assert v.diagnostics["sandwich_lower"] <= 1e-6
        assert an.odd_defect(v.u) > 0


def test_zero_k_reproduces_pure_dirac_problem():
    res = run_combined_ladder(combined_spec((1.0,), k_list=(0.0,)))
    g = Grid(2, 129)
    f = dipole_field(g, coupled_source(0.0, 1.0, 0.125))
    ref, _ = solve_semilinear(f, power(2.0))
    got = res.final_rungs()[(0.0, 1.0, 0.125)].u
    assert np.max(np.abs(got.values - ref.values)) < 1e-8


def test_combined_requires_positive_j():
    with pytest.raises(ValueError):
        run_combined_ladder(LadderSpec(g=power(2.0), M=33))


@pytest.fixture(scope="module")
def k_limit_result():
    return run_k_limit(LadderSpec(g=power(2.0), M=257, t_list=(0.0625,)), K=6)


def test_k_limit_monotone_and_diagnostics(k_limit_result):
    res = k_limit_result
    assert all(c.passed for c in res.checks if c.name.startswith("k_monotone"))
    assert res.summary["exponent_target"] == 2.0
    assert res.summary["exponent_fit"] == pytest.approx(2.0, rel=0.15)
    assert res.summary["angular_sup_distance"] <= 0.15
    assert "omega" in res.extras


def test_k_limit_saturation_trend(k_limit_result):
    # increments of w_k(0.1 e_N) under k -> 2k shrink relative to w_k
    finals = k_limit_result.final_rungs()
    vals = []
    for k in k_limit_result.spec.k_list:
        u = finals[(k, 0.0, 0.0625)].u
        vals.append(an.extract_ray(u, [0, 1], np.array([0.1])).values[0])
    growth = np.array(vals[1:]) / np.array(vals[:-1])
    assert np.all(np.diff(growth) < 0)
    assert growth[-1] < 2.0


def test_k_limit_two_sided_bound_shape(k_limit_result):
    u = k_limit_result.limit_field().u
    radii = np.geomspace(0.3, 0.05, 12)
    for e in ([0.0, 1.0], [0.6, 0.8]):
        e = np.array(e)
        scaled = an.extract_ray(u, e, radii).values * radii ** 2 / e[-1]
        assert scaled.min() > 0
        assert scaled.max() / scaled.min() < 10


def test_k_limit_rejects_supercritical():
    with pytest.raises(ValueError):
        run_k_limit(LadderSpec(g=power(3.5), M=33, t_list=(0.25,)))


def test_contrast_controls():
    spec = LadderSpec(g=power(3.5), M=513, t_list=(0.0625, 0.03125))
    res = run_supercritical_contrast(spec, control_p=2.0)
    row = res.summary["contrast"]["1"]
    # supercritical, k = 1: the coefficient already decreases as t shrinks
    assert row["nonincreasing"]
    assert row["ratio_to_2k"][-1] < 0.95
    control = res.summary["control"]["1"]
    assert control[-1] / 2.0 >= 0.9
    lin = run_supercritical_contrast(LadderSpec(g=zero(), M=257, t_list=(0.0625,)))
    assert lin.summary["contrast"]["1"]["ratio_to_2k"][-1] == pytest.approx(1.0, rel=0.05)
