"""Command-line entry point: ``whitham-lab <subcommand> [options]``.

Exit status: 0 when every check of the run passes, 1 on any failed check,
2 on configuration or usage errors.
"""
import argparse
from dataclasses import replace
import logging
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from . import export, harness
from .exceptions import BlowUpError, ConfigError, ConsistencyError
from .field_core import RealField
from .hierarchy import build_hierarchy, lift_phase, residuals
from .nls import WaveParams, mass, nls_evolve, nls_init
from .wme import trajectory_energy

log = logging.getLogger("whitham_lab")


def _eps_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--eps expects a comma-separated list: {exc}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment file")
    common.add_argument("--n", type=int, help="hierarchy order (0..3)")
    common.add_argument("--eps", type=_eps_list, metavar="LIST", help="comma-separated eps values")
    common.add_argument("--t0", type=float, metavar="REAL", help="final slow time")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, metavar="INT",
                        help=f"worker threads (fallback: ${cfgmod.THREADS_ENV})")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(
        prog="whitham-lab",
        description="Modulation-theory laboratory for the defocusing cubic NLS.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)
    helps = {
        "wme": "solve the modulation equations and monitor the energy",
        "hierarchy": "build the correction hierarchy and residual series",
        "nls": "run the NLS from modulated data and extract the deviation",
        "converge": "full eps convergence study with slope fits",
        "stability": "linearised wavetrain: conservation and Jordan growth",
        "classify": "hyperbolicity classification of the configured run",
    }
    for name in cfgmod.SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args):
    cfg = cfgmod.load(args.config) if args.config else cfgmod.Config()
    return cfgmod.with_overrides(cfg, n=args.n, eps=args.eps, t0=args.t0, out=args.out,
                                 threads=args.threads, subcommand=args.command)


def _check(key, title, passed, measured, threshold=None):
    return harness.CriterionResult(key, title, bool(passed), measured, threshold or {})


# -- subcommands ---------------------------------------------------------------

def cmd_wme(cfg, out):
    data = harness.initial_data(cfg)
    base = harness.run_base(cfg, data)
    export.export_trajectory(base, os.path.join(out, "trajectory"), cfg.slow_steps_per_snapshot,
                             {"k": cfg.wave.k, "t0": cfg.run.t0})
    E = trajectory_energy(base)
    drift = float(np.max(np.abs(E - E[0])) / E[0]) if E[0] > 0 else float(np.max(np.abs(E)))
    ubar = base.values[:, 1].mean(axis=-1)
    checks = [
        _check("energy", "energy drift", drift < 1e-8, {"relative_drift": drift},
               {"relative_drift": 1e-8}),
        _check("mean_u", "mean of u conserved", float(np.max(np.abs(ubar - ubar[0]))) < 1e-12,
               {"max_change": float(np.max(np.abs(ubar - ubar[0])))}, {"max_change": 1e-12}),
    ]
    return checks, {"edge_amplitude": data.edge, "gronwall": harness.gronwall_report(base)}, []


def cmd_hierarchy(cfg, out):
    data = harness.initial_data(cfg)
    base = harness.run_base(cfg, data)
    hier = build_hierarchy(base, cfg.run.n)
    manifest = harness.hierarchy_manifest(hier)
    export.export_hierarchy_manifest(manifest, out)
    sups, sups_h2, checks = [], [], []
    stride = cfg.slow_steps_per_snapshot
    worst_identity = 0.0
    for eps in cfg.run.eps:
        phase = lift_phase(hier, eps, data.phi0)
        worst_identity = max(worst_identity, phase.gradient_identity_defect())
        res = residuals(hier, phase, eps)
        export.export_residuals(res, out, stride)
        sups.append(float(np.max(res.norms["defect"][::stride])))
        sups_h2.append(float(np.max(res.norms["defect_H2"][::stride])))
    checks.append(_check("identity", "phase-gradient identity", worst_identity < 1e-9,
                         {"max_defect": worst_identity}, {"max_defect": 1e-9}))
    if len(sups) >= 3 and cfg.run.n >= 1 and min(sups) > 0:
        fit = harness.fit_slope(cfg.run.eps, sups)
        need = 2 * (cfg.run.n + 1) - cfg.run.slope_tolerance
        checks.append(_check("residual_slope", "residual order", fit.slope >= need,
                             {"slope": fit.slope, "sup_res_H1": sups}, {"slope": need}))
    return checks, {"hierarchy": manifest, "sup_res_H1": sups, "sup_res_H2": sups_h2}, []


def cmd_nls(cfg, out):
    data = harness.initial_data(cfg)
    params = WaveParams(cfg.wave.k)
    table = harness.run_convergence(cfg)
    checks = []
    for row in table.rows:
        if row.status == "ok":
            export.export_w_series(row, out)
        eps = row.eps
        m = cfg.nls_steps_per_snapshot(eps)
        s0 = nls_init(data.r0, data.phi0, params, eps, cfg.fast_points_for(eps))
        final = nls_evolve(s0, cfg.snapshot_interval / eps / m, m * cfg.run.snapshots)[-1]
        s0.psi.to_csv(os.path.join(out, f"psi_eps{eps!r}_t0.csv"))
        final.psi.to_csv(os.path.join(out, f"psi_eps{eps!r}_final.csv"))
        drift = abs(mass(final) - mass(s0)) / mass(s0)
        checks.append(_check(f"mass_eps{eps!r}", "NLS mass conservation", drift < 1e-9,
                             {"relative_drift": drift}, {"relative_drift": 1e-9}))
        checks.append(_check(f"run_eps{eps!r}", "deviation extracted", row.status == "ok",
                             {"status": row.status, "sup_W_H1": row.err_H1}))
    return checks, {}, [("nls", table)]


def converge_checks(cfg, table):
    n = cfg.run.n
    tol = cfg.run.slope_tolerance
    failed = [f"eps={r.eps!r}: {r.status}" for r in table.rows if r.status != "ok"]
    checks = [_check("rows", "all runs completed", not failed, {"failed": failed})]
    if table.degenerate:
        worst = max(r.err_H1 for r in table.rows)
        checks.append(_check("degenerate", "deviation at roundoff (slope fit skipped)",
                             worst < 1e-8, {"max_W_H1": worst}, {"max_W_H1": 1e-8}))
    elif n >= 1:
        err = table.err_fit.slope if table.err_fit else math.nan
        res = table.res_fit.slope if table.res_fit else math.nan
        checks.append(_check("validity_slope", "deviation slope", err >= 2 * n - tol,
                             {"slope": err, "ci95": table.err_ci95}, {"slope": 2 * n - tol}))
        checks.append(_check("residual_slope", "residual slope", res >= 2 * (n + 1) - tol,
                             {"slope": res, "ci95": table.res_ci95}, {"slope": 2 * (n + 1) - tol}))
    checks.append(_check("hyperbolic", "hyperbolic at every snapshot",
                         all(r.hyperbolic for r in table.rows if r.status == "ok"), {}))
    return checks


def cmd_converge(cfg, out):
    table = harness.run_convergence(cfg)
    for row in table.rows:
        if row.status == "ok":
            export.export_w_series(row, out)
    extra = {"validity_constants": harness.validity_constants(table, cfg.run.n)}
    return converge_checks(cfg, table), extra, [("converge", table)]


def cmd_stability(cfg, out):
    demo = harness.run_stability_demo(cfg)
    res = harness.criterion_stability(cfg, demo=demo)
    res.runtime = 0.0
    return [res], {"stability": demo}, []


def cmd_classify(cfg, out):
    data = harness.initial_data(cfg)
    base = harness.run_base(cfg, data)
    params = WaveParams(cfg.wave.k)
    grid = data.grid
    summaries = []
    for r, u in base.values[::cfg.slow_steps_per_snapshot]:
        theta_T = RealField(grid, params.omega - 2 * params.k * u - u * u - np.expm1(2 * r))
        theta_X = RealField(grid, params.k + u)
        summaries.append(harness.classify_hyperbolicity(theta_T, theta_X).summary)
    overall = summaries[0] if len(set(summaries)) == 1 else "mixed"
    print(overall)
    checks = [_check("classify", "hyperbolic with preserved sign", overall == "hyperbolic",
                     {"summary": overall, "snapshots": len(summaries)})]
    return checks, {"classification": overall}, []


COMMANDS = {
    "wme": cmd_wme, "hierarchy": cmd_hierarchy, "nls": cmd_nls,
    "converge": cmd_converge, "stability": cmd_stability, "classify": cmd_classify,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    report = harness.RunReport.start(cfg)
    try:
        checks, sections, tables = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (BlowUpError, ConsistencyError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        checks, sections, tables = [_check("run", "run completed", False,
                                           {"error": str(exc)})], {}, []
    report.sections.update(sections)
    for name, table in tables:
        report.add_table(name, table)
    report.add_criteria(checks)
    report.write(out, cfg)
    for c in checks:
        print(c.line())
    print(f"report written to {os.path.join(out, 'report.json')}")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
