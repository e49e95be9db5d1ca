"""Command-line front end: validation suites, inf-sup studies, solves,
and convergence experiments with machine-readable reports."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import verify
from .assembly import (GlobalSpace, error_norms, manufactured_problem,
                       solve_hybrid, solve_linear_pair, solve_stabilized)
from .elements import FAMILIES
from .errors import CertificationError, ConformityError, DomainError, GeometryError, NumericalError
from .mesh import barycentric_refine, read_mesh, uniform_box_mesh
from .verify import convergence_study, default_levels, infsup_constant, write_json

_METHODS = ("stabilized", "hybrid", "linear-pair")
_PAIRS = ("psi", "split", "reduced-rm", "rm-rm")


def _add_common(p):
    p.add_argument("--config", help="JSON file with defaults; flags override")
    p.add_argument("--d", type=int, help="spatial dimension (2 or 3)")
    p.add_argument("--k", type=int, help="polynomial order")
    p.add_argument("--mu", type=float, help="shear modulus")
    p.add_argument("--lambda", dest="lam", type=float, help="first Lame parameter")
    p.add_argument("--box", type=int, metavar="N", help="unit-box mesh with N^d cells")
    p.add_argument("--mesh", help="ASCII mesh file path")
    p.add_argument("--levels", type=int, help="number of refinement levels")
    p.add_argument("--out", help="output path prefix (.csv/.json are appended)")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="barystress",
        description="Symmetric stress elements on barycentric splits: "
                    "certification, inf-sup studies, and elasticity solves.")
    sub = ap.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="run the certification suite for a family")
    _add_common(pv)
    pv.add_argument("--family", choices=FAMILIES)

    pi = sub.add_parser("infsup", help="inf-sup constants over mesh levels")
    _add_common(pi)
    pi.add_argument("--pair", choices=_PAIRS)

    ps = sub.add_parser("solve", help="solve one elasticity problem")
    _add_common(ps)
    ps.add_argument("--method", choices=_METHODS)
    ps.add_argument("--pair", choices=_PAIRS[1:])

    pc = sub.add_parser("convergence", help="manufactured-solution rate study")
    _add_common(pc)
    pc.add_argument("--method", choices=_METHODS)
    pc.add_argument("--pair", choices=_PAIRS[1:])
    return ap


def _merge_config(args):
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key in ("d", "k", "mu", "lam", "box", "mesh", "levels", "out",
                "family", "pair", "method"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("d", 2)
    cfg.setdefault("k", 2)
    cfg.setdefault("mu", 1.0)
    cfg.setdefault("lam", 1.0)
    return cfg


def _load_mesh(cfg):
    if cfg.get("mesh"):
        return read_mesh(cfg["mesh"])
    return uniform_box_mesh(cfg["d"], cfg.get("box", 2))


def _cmd_validate(cfg):
    family = cfg.get("family", "high-psi")
    report = verify.validate_family(cfg["d"], cfg["k"], family)
    report["dimension_entries"] = [e.__dict__ | {"ok": e.ok} for e in
                                   verify.check_dimensions(cfg["d"], ks=(cfg["k"],),
                                                           families=(family,)
                                                           if family.startswith("high")
                                                           else None)]
    if cfg["k"] >= 2:
        report["div_range"] = verify.check_div_range(cfg["d"], cfg["k"])
    report["rigidity"] = verify.check_rigidity(cfg["d"])
    ok = report["ok"] and report["rigidity"]["ok"] \
        and report.get("div_range", {}).get("ok", True)
    report["all_ok"] = bool(ok)
    for entry in report["cells"]:
        status = "pass" if entry["ok"] else "FAIL"
        print(f"{family} d={cfg['d']} k={cfg['k']} [{entry['cell']}]: dim={entry['dim']} "
              f"cond={entry['cond']:.2e} jump={entry['jump']:.2e} {status}")
    if cfg.get("out"):
        write_json(report, cfg["out"] + ".json")
    return 0 if ok else 1


def _cmd_infsup(cfg):
    pair = cfg.get("pair", "psi")
    ns = cfg.get("ns") or default_levels(cfg["d"], cfg.get("levels", 3), "infsup")
    rep = infsup_constant(cfg["d"], cfg["k"], pair, ns=ns)
    for n, beta, nd in zip(rep.levels, rep.betas, rep.ndofs):
        print(f"pair={pair} d={cfg['d']} k={rep.k} n={n}: beta={beta:.6f} (dofs {nd})")
    print(f"ratio max/min = {rep.ratio:.4f}")
    if cfg.get("out"):
        write_json({"pair": pair, "d": cfg["d"], "k": rep.k, "levels": rep.levels,
                    "betas": rep.betas, "ratio": rep.ratio,
                    "bounded": rep.bounded}, cfg["out"] + ".json")
    ok = rep.min_beta > 1e-8
    return 0 if ok else 1


def _cmd_solve(cfg):
    mesh = _load_mesh(cfg)
    sm = barycentric_refine(mesh)
    problem = manufactured_problem(cfg["d"], cfg["mu"], cfg["lam"])
    method = cfg.get("method", "hybrid")
    if method == "stabilized":
        gs = GlobalSpace(sm, "high-reduced", cfg["k"])
        sol = solve_stabilized(problem, gs)
    elif method == "hybrid":
        sol = solve_hybrid(problem, sm, cfg["k"])
    else:
        sol = solve_linear_pair(problem, sm, cfg.get("pair", "split"))
    errs = error_norms(sol)
    for key, val in errs.items():
        print(f"{key} = {val:.6e}")
    if cfg.get("out"):
        write_json({"method": method, "d": cfg["d"], "k": cfg["k"],
                    "errors": {k2: float(v) for k2, v in errs.items()}},
                   cfg["out"] + ".json")
    return 0


def _cmd_convergence(cfg):
    method = cfg.get("method", "hybrid")
    study = {"d": cfg["d"], "k": cfg["k"], "method": method,
             "mu": cfg["mu"], "lambda": cfg["lam"],
             "levels": cfg.get("levels", 3)}
    if cfg.get("ns"):
        study["ns"] = cfg["ns"]
    if method == "linear-pair":
        study["pair"] = cfg.get("pair", "split")
        study["k"] = 1
    table = convergence_study(study)
    rates = table.rates()
    for lv in range(len(table.levels)):
        msg = (f"n={table.levels[lv]}: h={table.hs[lv]:.3e} "
               f"sigma_L2={table.errors[lv]['sigma_l2']:.4e}")
        if lv:
            msg += f" rate={rates['sigma_l2'][lv]:.2f}"
        print(msg)
    if cfg.get("out"):
        table.write_csv(cfg["out"] + ".csv")
        write_json(table.summary(), cfg["out"] + ".json")
    return 0


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.command == "validate":
            return _cmd_validate(cfg)
        if args.command == "infsup":
            return _cmd_infsup(cfg)
        if args.command == "solve":
            return _cmd_solve(cfg)
        if args.command == "convergence":
            return _cmd_convergence(cfg)
        raise DomainError(f"unknown command {args.command!r}")
    except (DomainError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CertificationError, NumericalError, GeometryError, ConformityError) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
