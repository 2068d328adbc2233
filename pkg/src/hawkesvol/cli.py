"""Command-line entry point.

Exit codes: 0 success / all checks pass, 1 a check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import affine_odes, hawkes_sim, measures, mc_harness
from .io import dumps, write_csv, write_json
from .model import ParameterError, TimeGrid, default_params, example_laws, law_to_dict, load_config, validate
from .montecarlo import McReport, stream_rng
from .sde_sim import simulate_stock, simulate_variance_batch, write_paths_csv

COMMANDS = ("simulate", "odes", "cs-table", "cl-solve", "bound-check", "martingale-check", "emm-check", "verify")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hawkesvol", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON config with model/hawkes/jump_law sections")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--grid-steps", type=int, default=None)
    p.add_argument("--c", type=float, default=None, help="exponent c (absolute)")
    p.add_argument("--a", type=float, default=None, help="Girsanov parameter a")
    p.add_argument("--suite", default="full", choices=sorted(mc_harness.SUITE_PATHS))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _params(args):
    if args.config is None:
        return validate(*default_params())
    return load_config(args.config)


def _grid(args, model, default_steps):
    return TimeGrid.uniform(model.horizon, args.grid_steps or default_steps)


def _report_json(r: McReport) -> dict:
    d = r.to_json()
    for k in ("a", "classification"):
        if k in r.extra:
            d[k] = r.extra[k]
    return d


def cmd_simulate(args) -> int:
    model, hawkes, law = _params(args)
    n = args.paths or 1
    grid = _grid(args, model, 1000)
    rng = stream_rng(args.seed, "simulate")
    marked = hawkes_sim.simulate_hawkes_batch(hawkes, law, model.horizon, rng, n)
    vb = simulate_variance_batch(model, marked, grid, "exact", rng)
    sb = simulate_stock(model, vb, grid, None, rng)
    write_paths_csv(args.out / "paths.csv", vb, sb)
    for p in range(n):
        hawkes_sim.write_path_csv(marked.path(p), args.out / f"events_{p}.csv")
    print(f"wrote {n} path(s) to {args.out}")
    return 0


def cmd_odes(args) -> int:
    model, hawkes, law = _params(args)
    c_l = affine_odes.compute_c_l(model, hawkes, law)
    c = 0.5 * c_l if args.c is None else args.c
    sol = affine_odes.supermartingale_bound(c, _grid(args, model, 1000), model, hawkes, law, c_limit=c_l)
    write_csv(args.out / "odes.csv", ["t", "G", "H", "F"], sol.rows())
    ctx = sol.ctx
    summary = {
        "c": c, "D": ctx.D, "Lambda": ctx.Lambda_c, "U": ctx.U, "x_p": ctx.x_p,
        "c_s": affine_odes.compute_c_s(model, hawkes, law), "c_l": c_l, "bound_M0": sol.bound_M0,
    }
    write_json(args.out / "odes.json", summary)
    print(dumps(summary), end="")
    return 0


def cmd_cs_table(args) -> int:
    model, hawkes, _ = _params(args)
    rows, ok = [], True
    for name, law in example_laws().items():
        validate(model, hawkes, law)
        c_s = affine_odes.compute_c_s(model, hawkes, law)
        c_l = affine_odes.compute_c_l(model, hawkes, law)
        ok &= 0 < c_s < c_l <= model.c_cap
        rows.append((name, c_s, c_l, model.c_cap))
    write_csv(args.out / "cs_table.csv", ["law", "c_s", "c_l", "cap"], rows)
    for r in rows:
        print(f"{r[0]:<12} c_s={r[1]:.12g} c_l={r[2]:.12g} cap={r[3]:.12g}")
    return 0 if ok else 1


def cmd_cl_solve(args) -> int:
    model, hawkes, law = _params(args)
    out = {
        "law": law_to_dict(law),
        "c_s": affine_odes.compute_c_s(model, hawkes, law),
        "c_l": affine_odes.compute_c_l(model, hawkes, law),
        "cap": model.c_cap,
    }
    write_json(args.out / "cl.json", out)
    print(dumps(out), end="")
    return 0 if 0 < out["c_s"] < out["c_l"] else 1


def cmd_bound_check(args) -> int:
    model, hawkes, law = _params(args)
    c_l = affine_odes.compute_c_l(model, hawkes, law)
    c = 0.5 * c_l if args.c is None else args.c
    exp = mc_harness.Experiment("exp-moment", model, hawkes, law, args.paths or 100_000, args.seed,
                                _grid(args, model, 100), args.workers)
    r = mc_harness.run_exp_moment(c, exp)
    return _emit(args, "bound_check.json", [r])


def cmd_martingale_check(args) -> int:
    model, hawkes, law = _params(args)
    c_l = affine_odes.compute_c_l(model, hawkes, law)
    a = 0.5 * measures.elmm_bound(c_l) if args.a is None else args.a
    res = measures.martingale_check(model, hawkes, law, a, args.paths or 100_000, _grid(args, model, 100),
                                    args.seed, args.workers, c_l)
    return _emit(args, "martingale_check.json", list(res.values()))


def cmd_emm_check(args) -> int:
    model, hawkes, law = _params(args)
    c_l = affine_odes.compute_c_l(model, hawkes, law)
    a = 0.5 * measures.emm_bound(c_l, model.rho) if args.a is None else args.a
    grid, n = _grid(args, model, 100), args.paths or 100_000
    direct = measures.emm_check_direct(model, hawkes, law, a, n, grid, args.seed, args.workers, c_l)
    weighted = measures.emm_check_weighted(model, hawkes, law, a, n, grid, args.seed, args.workers, c_l)
    return _emit(args, "emm_check.json", [direct, weighted, measures.cross_check(direct, weighted)])


def cmd_verify(args) -> int:
    kwargs = {}
    if args.config is not None:
        kwargs.update(zip(("model", "hawkes", "law"), _params(args)))
    reports = mc_harness.run_suite(args.suite, seed=args.seed, n_paths=args.paths, n_steps=args.grid_steps,
                                   workers=args.workers, **kwargs)
    doc = mc_harness.suite_json(args.suite, args.seed, reports)
    write_json(args.out / f"verify_{args.suite}.json", doc)
    print(mc_harness.format_table(reports))
    return 0 if doc["all_pass"] else 1


def _emit(args, fname, reports) -> int:
    doc = [_report_json(r) for r in reports]
    write_json(args.out / fname, doc)
    print(mc_harness.format_table(reports))
    return 0 if all(r.status != "fail" for r in reports) else 1


HANDLERS = {
    "simulate": cmd_simulate,
    "odes": cmd_odes,
    "cs-table": cmd_cs_table,
    "cl-solve": cmd_cl_solve,
    "bound-check": cmd_bound_check,
    "martingale-check": cmd_martingale_check,
    "emm-check": cmd_emm_check,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.paths is not None and args.paths < 1:
        print("error: --paths must be positive", file=sys.stderr)
        return 2
    try:
        return HANDLERS[args.command](args)
    except (ParameterError, measures.ClassificationMismatch, affine_odes.InadmissibleExponent,
            affine_odes.CapExceeded, FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
