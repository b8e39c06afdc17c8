"""Command line front end: run, sweep-gamma, compare-stab, profile.

The thread count of the numerical libraries can be set with HPBEM_THREADS.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

THREADS_ENV = "HPBEM_THREADS"


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _config(args):
    from .experiments import ExperimentConfig, load_config
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {k: v for k, v in (("out_dir", args.out), ("strategy", args.strategy), ("basis", args.basis),
                              ("gamma0", args.gamma0), ("preset", args.preset)) if v is not None}
    return dataclasses.replace(cfg, **over) if over else cfg


def build_parser():
    p = argparse.ArgumentParser(prog="hpbem-contact", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep-gamma", "compare-stab", "profile"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="experiment config file (INI sections)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--strategy", choices=("uniform_h", "adaptive_h", "adaptive_hp"))
        s.add_argument("--basis", choices=("bernstein", "gll"))
        s.add_argument("--gamma0", type=float)
        s.add_argument("--preset", choices=("tresca_square", "coulomb_square"))
        if name == "sweep-gamma":
            s.add_argument("--values", default="1e-10,1e-8,1e-6,1e-4,1e-3,1e-2,1e-1,0.2,1",
                           help="comma separated gamma0 values")
    return p


def main(argv=None):
    _limit_threads()
    args = build_parser().parse_args(argv)
    from .experiments import ConfigError
    try:
        cfg = _config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return _dispatch(args, cfg)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1


def _dispatch(args, cfg):
    from .experiments import dump_solution_profile, gamma0_sweep, run, stabilization_comparison, write_table
    out = Path(cfg.out_dir)
    if args.command == "run":
        rec = run(cfg)
        print(f"{cfg.preset} {cfg.strategy}: {len(rec.rows)} steps, ok={rec.ok}, wrote {out / 'steps.csv'}")
        if not rec.ok:
            print(f"error: {rec.error or 'a solve did not converge'}", file=sys.stderr)
        return 0 if rec.ok else 1
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "sweep-gamma":
        rows = gamma0_sweep(cfg, [float(v) for v in args.values.split(",")])
        with open(out / "gamma_sweep.csv", "w") as fh:
            write_table(rows, fh)
        print(f"wrote {out / 'gamma_sweep.csv'}")
        return 0 if not any(r["error"] for r in rows) else 1
    if args.command == "compare-stab":
        rows = stabilization_comparison(cfg)
        with open(out / "stabilization.csv", "w") as fh:
            write_table(rows, fh)
        print(f"wrote {out / 'stabilization.csv'}")
        return 0
    # profile: solve on the initial mesh and sample the contact part
    from .contact import assemble_system, solve
    from .spaces import build_spaces
    spec = cfg.problem()
    mesh = cfg.initial_mesh()
    system = assemble_system(spec, mesh, build_spaces(mesh, cfg.basis), cfg.stab_mode)
    sol = solve(spec, system)
    with open(out / "profile.csv", "w") as fh:
        dump_solution_profile(system, sol, fh)
    (out / "profile_solver.json").write_text(json.dumps({"converged": bool(sol.converged),
                                                         "iterations": sol.newton_iterations}))
    print(f"wrote {out / 'profile.csv'}")
    return 0 if sol.converged else 1


if __name__ == "__main__":
    sys.exit(main())
