"""Command-line front end: search, verify-catalog, simulate, restart, dump-groups."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import analysis, restart as restart_mod, simulate as sim
from .expr import GAMMA_FORMS
from .sequences import dump_groups_csv, enumerate_pairs
from .systems import resolve_system


def _parse_param(text: str) -> tuple[str, float]:
    name, _, value = text.partition("=")
    if not _:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return name.strip(), float(value)


def _parse_param_grid(text: str) -> tuple[str, tuple[float, ...]]:
    name, _, spec = text.partition("=")
    if not _:
        raise argparse.ArgumentTypeError(f"expected NAME=START:STEP:STOP, got {text!r}")
    parts = spec.split(":")
    if len(parts) == 1:
        values = tuple(float(v) for v in spec.split(","))
    elif len(parts) == 3:
        start, step, stop = (float(p) for p in parts)
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = tuple(start + i * step for i in range(max(n, 1)))
    else:
        raise argparse.ArgumentTypeError(f"bad grid spec {text!r}")
    return name.strip(), values


def _parse_t_domain(text: str):
    if text == "all":
        return analysis.AllPositive()
    if text == "eventually":
        return analysis.Eventually()
    if text.startswith("eventually:"):
        return analysis.Eventually(float(text.split(":", 1)[1]))
    if text.startswith("window:"):
        _, lo, hi = text.split(":")
        return analysis.Window(float(lo), float(hi))
    raise argparse.ArgumentTypeError(f"bad t-domain {text!r}")


def _default_jobs(value):
    if value is not None:
        return value
    env = os.environ.get("LYAP_JOBS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lyapsearch")
    parser.add_argument("--jobs", type=int, default=None,
                        help="analysis worker pool size (env LYAP_JOBS; default: all cores)")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="enumerate pairs and maximize the rate per group")
    p.add_argument("--spec", required=True, help="catalog name or system-spec file")
    p.add_argument("--gamma", choices=sorted(GAMMA_FORMS), default="linear")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--convex", action="store_true")
    p.add_argument("--param", type=_parse_param, action="append", default=[])
    p.add_argument("--param-grid", type=_parse_param_grid, action="append", default=[])
    p.add_argument("--t-domain", type=_parse_t_domain, default=analysis.AllPositive())
    p.add_argument("--out", default=None, help="report CSV (default: stdout)")

    p = sub.add_parser("verify-catalog", help="re-derive every catalog rate")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--rows", default=None,
                   help="comma-separated row labels to run (default: all)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="integrate a system and fit its decay rate")
    p.add_argument("--spec", required=True)
    p.add_argument("--gamma", choices=sorted(GAMMA_FORMS), default="linear")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--t1", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--param", type=_parse_param, action="append", default=[])
    p.add_argument("--csv", default=None)

    p = sub.add_parser("restart", help="run the clock-restart scheme")
    p.add_argument("--l", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--rounds", type=int, default=20)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--csv", default=None)

    p = sub.add_parser("dump-groups", help="enumerate and list the pair groups")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    return parser


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _cmd_search(args) -> int:
    system = resolve_system(args.spec)
    query = analysis.RateQuery(
        gamma=GAMMA_FORMS[args.gamma], mu=args.mu, L=args.L, convex=args.convex,
        params=dict(args.param), grid={n: v for n, v in args.param_grid},
        t_domain=args.t_domain)
    groups = enumerate_pairs(system)
    rates = analysis.analyze_groups(groups, query, jobs=args.jobs)
    out = _open_out(args.out)
    out.write(f"# search system={system.name} gamma={args.gamma} mu={args.mu} "
              f"L={args.L} convex={args.convex} seed={args.seed}\n")
    writer = csv.writer(out)
    writer.writerow(["group_id", "ops", "k_max", "params", "t_validity", "n_minors", "status"])
    for rate, group in zip(rates, groups):
        if rate.result is None:
            writer.writerow([rate.group_id, group.sequences[0].label(), "", "", "", "", "infeasible-at-0"])
            continue
        r = rate.result
        params = " ".join(f"{k}={v:g}" for k, v in sorted(r.params.items()))
        validity = f"{r.validity[0]:g}..{r.validity[1]:g}"
        writer.writerow([rate.group_id, group.sequences[0].label(), f"{r.k_max:.8g}",
                         params, validity, r.n_minors, r.status])
    if args.out:
        out.close()
        best = analysis.best_rate(rates)
        summary = f"best k={best.k_max:.6g}" if best else "no feasible group"
        print(f"wrote {args.out}; {len(groups)} groups, {summary}")
    return 0


def _cmd_verify_catalog(args) -> int:
    rows = args.rows.split(",") if args.rows else None
    report = analysis.verify_catalog(mu=args.mu, L=args.L, jobs=args.jobs, rows=rows)
    lines = [f"{'row':24s} {'expected':>22s} {'observed':>22s}  result"]
    for row in report.rows:
        lines.append(f"{row.label:24s} {row.expected:>22s} {row.observed:>22s}  "
                     f"{'ok' if row.passed else 'MISMATCH'}")
    text = "\n".join(lines)
    print(text)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(f"# verify-catalog mu={args.mu} L={args.L}\n")
            writer = csv.writer(fh)
            writer.writerow(["row", "expected", "observed", "passed", "groups", "infeasible_at_0"])
            for row in report.rows:
                writer.writerow([row.label, row.expected, row.observed, row.passed,
                                 row.n_groups, row.n_infeasible])
    return 0 if report.passed else 2


def _cmd_simulate(args) -> int:
    system = resolve_system(args.spec)
    obj = sim.QuadraticObjective.log_spaced(args.dim, args.mu, args.L)
    params = dict(args.param)
    traj = sim.integrate(system, obj, np.ones(args.dim), np.zeros(args.dim),
                         t0=args.t0, t1=args.t1, dt=args.dt, params=params)
    gamma = GAMMA_FORMS[args.gamma]
    fit = sim.measure_rate(traj, gamma, {**params, "k": 1.0})
    print(f"fitted k = {fit.k:.6g} (residual {fit.residual:.3g}, "
          f"window {fit.window[0]:.3g}..{fit.window[1]:.3g})")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(f"# simulate system={system.name} gamma={args.gamma} mu={args.mu} "
                     f"L={args.L} dt={args.dt} params={params}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "gap"])
            for t, gap in zip(traj.times, traj.gaps):
                writer.writerow([f"{t:.10g}", f"{gap:.10g}"])
    return 0


def _cmd_restart(args) -> int:
    spec = restart_mod.RestartSpec(l=args.l, c=args.c, mu=args.mu, rounds=args.rounds,
                                   dim=args.dim, L=args.L, dt=args.dt)
    report = restart_mod.run_restart(spec)
    print(f"h = {report.h:.9g}, C = {report.C:.9g}, per-round bound = {report.factor_bound:.6g}")
    print(f"max observed factor = {max(report.factors):.6g}, "
          f"chained bound {'holds' if report.chained_bound_ok else 'VIOLATED'}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(f"# restart l={args.l} c={args.c} mu={args.mu} rounds={args.rounds} "
                     f"T={spec.T:.10g} h={report.h:.10g} C={report.C:.10g}\n")
            writer = csv.writer(fh)
            writer.writerow(["round", "g", "factor"])
            writer.writerow([0, f"{report.g_values[0]:.10g}", ""])
            for i, (g, f) in enumerate(zip(report.g_values[1:], report.factors), start=1):
                writer.writerow([i, f"{g:.10g}", f"{f:.10g}"])
    return 0 if report.chained_bound_ok else 2


def _cmd_dump_groups(args) -> int:
    system = resolve_system(args.spec)
    groups = enumerate_pairs(system)
    dump_groups_csv(groups, args.out, system.name)
    print(f"wrote {args.out}: {len(groups)} groups from {sum(g.member_count for g in groups)} sequences")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    args.jobs = _default_jobs(args.jobs)
    handlers = {
        "search": _cmd_search,
        "verify-catalog": _cmd_verify_catalog,
        "simulate": _cmd_simulate,
        "restart": _cmd_restart,
        "dump-groups": _cmd_dump_groups,
    }
    try:
        return handlers[args.command](args)
    except (KeyError, ValueError, OSError, sim.SimulationError,
            analysis.AnalysisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
