"""Batch front-end: ``anisolab run <config>`` and ``anisolab report <manifest>``.

Exit codes: 0 all enabled assertions pass, 2 configuration error,
3 solver failure, 4 assertion failure.
"""
import argparse
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__, io, ladder
from .config import load_config
from .errors import ConfigError, SolverError
from .nonlinearity import check_subcritical
from .selftest import kernel_selftest
from .solver import SolverSettings

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ASSERT = 0, 2, 3, 4

log = logging.getLogger("anisolab")

_LADDER_MODE = {"dipole": "dipole_only", "combined": "combined", "k_limit": "k_limit",
                "supercritical_contrast": "dipole_only"}


def _settings(cfg):
    overrides = {name: getattr(cfg, name) for name in
                 ("tol_linear", "tol_nl_rel", "max_newton", "preconditioner")
                 if getattr(cfg, name) is not None}
    return SolverSettings.from_env(**overrides)


def build_spec(cfg):
    j = cfg.j
    if cfg.mode == "combined" and j == (0.0,):
        raise ConfigError("combined mode needs j > 0")
    try:
        return ladder.LadderSpec(
            g=cfg.g, dimension=cfg.dimension, M=cfg.M, k_list=cfg.k, j_list=j,
            t_list=cfg.t, n_list=cfg.n, mode=_LADDER_MODE[cfg.mode],
            eps_ratio=cfg.eps_ratio, auto_n=cfg.auto_n, fit_direction=cfg.fit_direction,
            fit_rmax=cfg.fit_rmax, fit_window=cfg.fit_window, dirac_window=cfg.dirac_window,
            exponent_window=cfg.exponent_window, angular_radius=cfg.angular_radius,
            richardson=cfg.richardson, workers=cfg.workers, settings=_settings(cfg),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _check_criticality(cfg):
    if not cfg.assert_subcritical or cfg.mode not in ("dipole", "combined", "k_limit"):
        return
    sub = check_subcritical(cfg.g, cfg.dimension)
    if not sub["converges"]:
        raise ConfigError(
            f"{cfg.g.label} is not subcritical in dimension {cfg.dimension}: "
            f"the critical exponent is (N+1)/(N-1) = {sub['critical_exponent']:g} "
            "and no x_N-odd solution exists at or above it "
            "(use mode = supercritical_contrast or assert_subcritical = false)"
        )


def run_ladder(cfg):
    spec = build_spec(cfg)
    check = cfg.assert_subcritical
    if cfg.mode == "dipole":
        return ladder.run_dipole_ladder(spec, check_subcritical_g=check)
    if cfg.mode == "combined":
        return ladder.run_combined_ladder(spec)
    if cfg.mode == "k_limit":
        return ladder.run_k_limit(spec, K=cfg.K)
    return ladder.run_supercritical_contrast(spec, control_p=cfg.control_p)


def _rung_name(r):
    n = "inf" if math.isinf(r.n) else io.fmt(r.n)
    return f"k{io.fmt(r.k)}_j{io.fmt(r.j)}_n{n}_t{io.fmt(r.t)}"


def _fit_rows(result):
    rows = []
    for r in result.rungs.values():
        for quantity, fit in r.diagnostics.get("fits", []):
            rows.append({
                "k": r.k, "j": r.j, "n": "inf" if math.isinf(r.n) else r.n, "t": r.t,
                "quantity": quantity, "model": fit.model, "coefficient": fit.coefficient,
                "exponent": fit.exponent, "r_squared": fit.r_squared,
                "window_lo": fit.window[0], "window_hi": fit.window[1], "samples": fit.samples,
                "direction": " ".join(io.fmt(c) for c in fit.direction),
            })
    return rows


def _assertion(name, enabled, passed, detail=""):
    return {"name": name, "enabled": bool(enabled), "passed": bool(passed), "detail": detail}


def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def _target_assertions(cfg, result):
    out = []
    tol = cfg.target_tolerance
    finals = result.final_rungs()
    t = result.spec.t_list[-1]
    for (k, j, tt), r in finals.items():
        if tt != t:
            continue
        d = r.diagnostics
        if cfg.mode in ("dipole", "combined"):
            c = d["coeff_dipole"]
            out.append(_assertion(f"target_dipole[k={k:g},j={j:g}]", True,
                                  np.isfinite(c) and _rel(c, 2 * k) <= tol,
                                  f"fitted {c:.6g} vs 2k = {2 * k:g} (tol {tol:g})"))
        if cfg.mode == "combined":
            c = d["coeff_dirac"]
            out.append(_assertion(f"target_dirac[k={k:g},j={j:g}]", True,
                                  np.isfinite(c) and _rel(c, j) <= tol,
                                  f"fitted {c:.6g} vs j = {j:g} (tol {tol:g})"))
    if cfg.mode == "k_limit":
        s = result.summary
        e, target = s.get("exponent_fit"), s.get("exponent_target")
        out.append(_assertion("target_exponent", True,
                              e is not None and np.isfinite(e) and _rel(e, target) <= tol,
                              f"fitted {e:.6g} vs 2/(p-1) = {target:g} (tol {tol:g})"))
        if "angular_sup_distance" in s:
            dist = s["angular_sup_distance"]
            out.append(_assertion("target_angular_shape", True, dist <= tol,
                                  f"sup distance {dist:.4g} to the ODE profile (tol {tol:g})"))
    return out


def _contrast_assertions(cfg, result):
    out = []
    for k, row in result.summary.get("contrast", {}).items():
        ratios = row["ratio_to_2k"]
        out.append(_assertion(f"contrast_nonincreasing[k={k}]", True, row["nonincreasing"],
                              "fitted coefficient per t-rung " + ", ".join(io.fmt(c) for c in
                                                                         row["coeff_dipole"])))
        last = ratios[-1]
        out.append(_assertion(f"contrast_drop[k={k}]", True,
                              np.isfinite(last) and last < cfg.contrast_drop,
                              f"finest coefficient / 2k = {last:.4g} (< {cfg.contrast_drop:g})"))
    for k, coeffs in result.summary.get("control", {}).items():
        ratio = coeffs[-1] / (2.0 * float(k))
        out.append(_assertion(f"control_coefficient[k={k}]", True,
                              np.isfinite(ratio) and ratio >= 1.0 - cfg.target_tolerance,
                              f"control finest coefficient / 2k = {ratio:.4g}"))
    return out


_CHECK_TOGGLE = (("barrier", "assert_orderings"), ("n_monotone", "assert_orderings"),
                 ("k_monotone", "assert_orderings"), ("lambda_hat", "assert_orderings"),
                 ("odd", "assert_odd"), ("sandwich", "assert_sandwich"),
                 ("warm_start", "assert_warm_start"))


def _toggle_for(name):
    for prefix, toggle in _CHECK_TOGGLE:
        if name.startswith(prefix):
            return toggle
    return "assert_orderings"


def _write_outputs(cfg, result, out):
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    conv = io.write_csv(out / "convergence.csv", result.table_rows(), io.CONVERGENCE_COLUMNS)
    fits = io.write_csv(out / "fits.csv", _fit_rows(result), io.FITS_COLUMNS)
    files["convergence"] = conv.name
    files["fits"] = fits.name
    if "omega" in result.extras:
        prof = result.extras["omega"]
        theta = np.linspace(0.0, np.pi, 361)
        io.write_csv(out / "omega.csv",
                     [{"theta": a, "omega": b} for a, b in zip(theta, prof(theta))],
                     ("theta", "omega"))
        th, shape, ref = result.extras["angular"]
        io.write_csv(out / "angular.csv",
                     [{"theta": a, "field_shape": b, "omega_shape": c}
                      for a, b, c in zip(th, shape, ref)],
                     ("theta", "field_shape", "omega_shape"))
        files["omega"] = "omega.csv"
        files["angular"] = "angular.csv"
    rungs = []
    for r in result.rungs.values():
        name = _rung_name(r)
        entry = {"k": r.k, "j": r.j, "n": "inf" if math.isinf(r.n) else r.n, "t": r.t,
                 "m": r.m, "report": f"reports/{name}.json",
                 "diagnostics": {key: v for key, v in r.diagnostics.items() if key != "fits"}}
        io.write_json(out / entry["report"], r.report.to_dict())
        if cfg.dump_fields in ("csv", "both"):
            entry["field_csv"] = f"fields/{name}.csv"
            io.write_field_csv(out / entry["field_csv"], r.u)
        if cfg.dump_fields in ("binary", "both"):
            entry["field_bin"] = f"fields/{name}.bin"
            io.write_field_binary(out / entry["field_bin"], r.u)
        rungs.append(entry)
    return files, rungs


def execute(cfg, output_dir=None):
    """Run one configured experiment; returns (manifest, exit code)."""
    out = Path(output_dir or cfg.output_dir)
    manifest = {"version": __version__, "config": cfg.to_dict(), "mode": cfg.mode,
                "output_dir": str(out)}
    assertions = []
    if cfg.mode == "kernels_selftest":
        res = kernel_selftest(cfg.dimension, cfg.M)
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"delta": d, "dq_error": e, "order": o}
                for d, e, o in zip(res["deltas"], res["dq_errors"],
                                   [float("nan")] + res["dq_orders"])]
        io.write_csv(out / "selftest.csv", rows, ("delta", "dq_error", "order"))
        manifest["files"] = {"selftest": "selftest.csv"}
        manifest["selftest"] = res
        for name, ok in res["checks"].items():
            assertions.append(_assertion(name, True, ok))
    else:
        _check_criticality(cfg)
        result = run_ladder(cfg)
        if cfg.assert_warm_start:
            ladder.warm_start_check(result)
        for c in result.checks:
            toggle = _toggle_for(c.name)
            assertions.append(_assertion(c.name, getattr(cfg, toggle), c.passed,
                                         f"worst {c.worst:.3e} {c.detail}".strip()))
        assertions += [dict(a, enabled=cfg.assert_targets)
                       for a in _target_assertions(cfg, result)]
        assertions += [dict(a, enabled=cfg.assert_contrast)
                       for a in _contrast_assertions(cfg, result)]
        files, rungs = _write_outputs(cfg, result, out)
        if cfg.assert_determinism:
            again = run_ladder(cfg)
            same = (io.csv_text(again.table_rows(), io.CONVERGENCE_COLUMNS)
                    == (out / files["convergence"]).read_text()
                    and io.csv_text(_fit_rows(again), io.FITS_COLUMNS)
                    == (out / files["fits"]).read_text())
            assertions.append(_assertion("determinism_csv", True, same,
                                         "re-run reproduces convergence.csv and fits.csv"))
        manifest.update(spec=result.spec.to_dict(), files=files, rungs=rungs,
                        gaps=[{"limit": g["limit"], "from": list(g["from"]),
                               "to": list(g["to"]), "L1_gap": g["L1_gap"]}
                              for g in result.gaps],
                        summary=result.summary)
    failed = [a for a in assertions if a["enabled"] and not a["passed"]]
    manifest["assertions"] = assertions
    manifest["status"] = "fail" if failed else "pass"
    code = EXIT_ASSERT if failed else EXIT_OK
    manifest["exit_code"] = code
    io.write_json(out / "manifest.json", manifest)
    return manifest, code


def _fmt_cell(v):
    try:
        x = float(v)
    except (TypeError, ValueError):
        return str(v)
    if math.isnan(x):
        return "-"
    return f"{x:.4g}"


def format_report(manifest, base):
    """Human-readable summary of a manifest."""
    lines = [f"anisolab report: mode={manifest['mode']} status={manifest['status']}"]
    files = manifest.get("files", {})
    if "convergence" in files:
        rows = io.read_csv(base / files["convergence"])
        lines.append("")
        lines.append("convergence")
        cols = io.CONVERGENCE_COLUMNS
        table = [list(cols)] + [[_fmt_cell(r[c]) for c in cols] for r in rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
        for row in table:
            lines.append("  " + "  ".join(c.rjust(w) for c, w in zip(row, widths)))
    summary = manifest.get("summary", {})
    if summary.get("finest"):
        lines.append("")
        lines.append("fitted vs target (finest rung)")
        for label, fin in summary["finest"].items():
            tgt = summary["targets"][label]
            lines.append(f"  {label}: coeff_dipole {_fmt_cell(fin['coeff_dipole'])} "
                         f"(target 2k = {_fmt_cell(tgt['coeff_dipole'])}), coeff_dirac "
                         f"{_fmt_cell(fin['coeff_dirac'])} (target j = {_fmt_cell(tgt['coeff_dirac'])})")
            if "exponent" in tgt:
                lines.append(f"  {label}: exponent {_fmt_cell(fin['exponent_fit'])} "
                             f"(target 2/(p-1) = {_fmt_cell(tgt['exponent'])})")
    if "selftest" in manifest:
        st = manifest["selftest"]
        lines.append("")
        lines.append(f"kernel self-test N={st['dimension']} M={st['M']}: symmetry defect "
                     f"{st['symmetry_defect']:.3g}, difference-quotient orders "
                     + ", ".join(f"{o:.3f}" for o in st["dq_orders"]))
    lines.append("")
    lines.append("assertions")
    for a in manifest.get("assertions", []):
        tag = ("PASS" if a["passed"] else "FAIL") if a["enabled"] else "SKIP"
        detail = f" ({a['detail']})" if a.get("detail") else ""
        lines.append(f"  {tag} {a['name']}{detail}")
    return "\n".join(lines) + "\n"


def report(manifest_path, stream=None):
    stream = stream or sys.stdout
    path = Path(manifest_path)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"error: cannot read manifest {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        print(f"error: manifest {path} is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not manifest or "mode" not in manifest or "status" not in manifest:
        print(f"error: manifest {path} is empty or incomplete", file=sys.stderr)
        return EXIT_CONFIG
    try:
        stream.write(format_report(manifest, path.parent))
    except (OSError, KeyError) as exc:
        print(f"error: missing artifact for {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def run(config_path, output_dir=None, workers=None, strict=False):
    try:
        cfg = load_config(config_path)
        if workers is not None:
            cfg.workers = workers
        if strict:
            cfg.strict()
        manifest, code = execute(cfg, output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for a in manifest["assertions"]:
        if a["enabled"] and not a["passed"]:
            print(f"FAIL {a['name']}: {a['detail']}", file=sys.stderr)
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(prog="anisolab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--strict", action="store_true", help="turn every assertion toggle on")
    p_rep = sub.add_parser("report", help="summarize a manifest")
    p_rep.add_argument("manifest")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return run(args.config, args.output_dir, args.workers, args.strict)
    return report(args.manifest)


if __name__ == "__main__":
    sys.exit(main())
