"""Command line entry point: ``opfree run | describe | suites``.

Exit codes: 0 when no check fails, 1 when some check fails, 2 on
configuration, validation or size errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import build, load_config
from .covmap import check_completely_positive, tau_symmetry_defects
from .errors import OpfreeError
from .fock import FockModel, build_bimodule
from .report import FAIL, NOT_REPRODUCIBLE, PASS, WARN
from .suites import REGISTRY, SuiteContext, default_suites, run_suites

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opfree", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run verification suites on a configuration")
    run.add_argument("config")
    run.add_argument("--depth", type=int, help="Fock truncation depth")
    run.add_argument("--seed", type=int, help="random seed")
    run.add_argument("--tolerance", type=float, help="defect tolerance")
    run.add_argument("--suite", action="append", dest="suites", metavar="NAME",
                     help="suite to run (repeatable; default: the configured or default set)")
    run.add_argument("--out", help="write the report here instead of standard output")
    desc = sub.add_parser("describe", help="summarize the model of a configuration")
    desc.add_argument("config")
    desc.add_argument("--depth", type=int)
    sub.add_parser("suites", help="list registered suites")
    return ap


def _apply_flags(cfg, args):
    changes = {}
    for name in ("depth", "seed", "tolerance"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "suites", None):
        changes["suites"] = args.suites
    return dataclasses.replace(cfg, **changes)


def run(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    built = build(cfg)
    sc = SuiteContext(cfg, built.ctx, built.eta)
    names = cfg.suites or default_suites(cfg)
    reports = run_suites(sc, names)
    lines = [f"# opfree report for {cfg.name}",
             f"# depth={cfg.depth} seed={cfg.seed} tolerance={cfg.tolerance:.1e} "
             f"B_dim={built.ctx.dim} indices={built.eta.index_count}"]
    lines += [rep.to_text() for rep in reports]
    statuses = [rep.status() for rep in reports]
    overall = FAIL if FAIL in statuses else (WARN if WARN in statuses else PASS)
    counts = {s: statuses.count(s) for s in (PASS, WARN, FAIL, NOT_REPRODUCIBLE)}
    lines.append("# overall=%s suites=%d " % (overall, len(reports))
                 + " ".join(f"{k}={v}" for k, v in counts.items()))
    text = "\n".join(lines) + "\n"
    out = args.out or cfg.output
    if out:
        Path(out).write_text(text)
        print(f"{overall}: report written to {out}")
    else:
        sys.stdout.write(text)
    return EXIT_FAIL if overall == FAIL else EXIT_OK


def describe(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    built = build(cfg)
    ctx, eta = built.ctx, built.eta
    cp = check_completely_positive(eta)
    bimod = build_bimodule(ctx, eta)
    model = FockModel(ctx, eta, cfg.depth)
    print(f"config: {cfg.name}")
    print(f"B dimension {ctx.dim} inside M_{ctx.ambient_dim}")
    print(f"covariance: {eta.label}, {eta.index_count} indices")
    print(f"  CP min eigenvalue {cp.min_eigenvalue:.3e}")
    print(f"  tau-symmetry defect {np.abs(tau_symmetry_defects(eta)).max():.3e}")
    print(f"bimodule dimension {bimod.dim}")
    print(f"levels: {','.join(str(d) for d in model.dims)}; exact to degree {model.exact_degree}")
    return EXIT_OK


def list_suites(args) -> int:
    width = max(len(n) for n in REGISTRY)
    for name in sorted(REGISTRY):
        s = REGISTRY[name]
        flag = "" if s.default else "  (opt-in)"
        print(f"{name:<{width}}  {s.anchor}{flag}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": run, "describe": describe, "suites": list_suites}[args.command]
    try:
        return handler(args)
    except OpfreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
