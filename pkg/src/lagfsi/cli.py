"""Command-line entry point: ``lagfsi {run, check-compat, verify, sweep}``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config
from .pipeline import EXIT_CONFIG, SWEEPS, PipelineError, compat_table, run_pipeline, run_sweep, setup_problem


def _load(path):
    try:
        return parse_config(path)
    except ConfigError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG) from exc


def cmd_run(args) -> int:
    cfg = _load(args.config)
    res = run_pipeline(cfg, args.out, args.emit_iterates)
    for m in res.messages:
        print(m, file=sys.stderr)
    fp = res.report.get("fixed_point", {})
    if fp:
        print(f"converged={fp['converged']} iterations={fp['iterations']} "
              f"T={fp['T']:g} ratios={['%.3g' % r for r in fp['contraction_ratios']]}")
    for name, path in res.files.items():
        print(f"{name}: {path}")
    return res.status


def cmd_check_compat(args) -> int:
    cfg = _load(args.config)
    try:
        prob = setup_problem(cfg)
    except PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return exc.status
    sys.stdout.write(compat_table(prob.data.compat_residuals, prob.compat_tol, cfg.hash))
    return 0 if prob.compat_ok() else 1


def cmd_verify(args) -> int:
    from .verify import run_verification

    reports = run_verification()
    for r in reports:
        print(r.line(), flush=True)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    return 0 if failed == 0 else 1


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    values = None
    if args.values:
        conv = int if args.param == "n" else float
        values = tuple(conv(v) for v in args.values.split(","))
    try:
        rows = run_sweep(cfg, args.param, values)
    except PipelineError as exc:
        print(str(exc), file=sys.stderr)
        return exc.status
    print(f"# config_hash={cfg.hash}")
    keys = list(rows[0])
    print(",".join(keys))
    for r in rows:
        print(",".join(repr(float(r[k])) if not isinstance(r[k], bool) else str(int(r[k])) for k in keys))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagfsi", description="Lagrangian fluid-structure interaction solver")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="full fixed-point run with CSV/JSON/snapshot outputs")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: output.dir from the config)")
    r.add_argument("--emit-iterates", default=None, metavar="DIR", help="write every Picard iterate to DIR")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-compat", help="print the compatibility residual table")
    c.add_argument("config")
    c.set_defaults(func=cmd_check_compat)

    v = sub.add_parser("verify", help="run the oracle-backed correctness suite")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="parameter sweep printed as CSV")
    s.add_argument("--param", required=True, choices=sorted(SWEEPS))
    s.add_argument("config")
    s.add_argument("--values", default=None, help="comma-separated values (default: built-in sweep)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
