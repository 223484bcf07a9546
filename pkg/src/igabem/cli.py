"""Command line front end: ``igabem solve | verify | sweep | info``.

Exit codes: 0 success, 1 verification failure, 2 model/argument error,
3 assembly error, 4 solve error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .assembly import AssemblyError, assemble_boundary, assemble_system, build_dofmap, displacement_at
from .inclusions import DegenerateMappingError, GeneralInclusion, LinearInclusion
from .model_io import (ModelError, build_problem, load_model, make_bundle, model_hash, write_convergence_csv,
                       write_results)
from .quadrature.surface import QuadratureError
from .solver import SolveError, SolveOptions, recover_fields, solve

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_ASSEMBLY, EXIT_SOLVE, EXIT_IO = 0, 1, 2, 3, 4, 5

log = logging.getLogger("igabem")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _setup_logging(level: str | None):
    level = (level or os.environ.get("IGABEM_LOG") or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load(path):
    try:
        return load_model(path)
    except ModelError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from exc


def _apply_overrides(model, args):
    upd = {}
    if getattr(args, "method", None):
        upd["method"] = args.method
    if getattr(args, "tol", None) is not None:
        upd["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        upd["max_iter"] = args.max_iter
    if upd:
        model = model.model_copy(update={"solver": model.solver.model_copy(update=upd)})
    if getattr(args, "quad_order", None) is not None:
        q = model.quadrature.model_copy(update={"base_order": args.quad_order})
        model = model.model_copy(update={"quadrature": q})
    return model


def _build(model):
    try:
        return build_problem(model)
    except (ModelError, ValueError) as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc


def _assemble(problem, workers, boundary=None):
    try:
        if boundary is None:
            boundary = assemble_boundary(problem, workers)
        return boundary, assemble_system(problem, boundary, workers)
    except (AssemblyError, QuadratureError, DegenerateMappingError, ValueError, np.linalg.LinAlgError) as exc:
        raise CliError(EXIT_ASSEMBLY, f"assembly failed: {exc}") from exc


def _solve(S, opts):
    try:
        return solve(S, opts)
    except SolveError as exc:
        raise CliError(EXIT_SOLVE, f"solve failed: {exc}") from exc


def _probe_values(model, problem, op, result):
    if not model.output.probes:
        return []
    pts = np.array([p.x for p in model.output.probes], dtype=float)
    try:
        u = displacement_at(pts, result.x, problem, op, result.s0)
    except (QuadratureError, ValueError) as exc:
        raise CliError(EXIT_ASSEMBLY, f"probe evaluation failed: {exc}") from exc
    return [{"id": p.id, "x": list(p.x), "u": u[k]} for k, p in enumerate(model.output.probes)]


def _workers(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _solver_options(model):
    s = model.solver
    return SolveOptions(method=s.method, tol=s.tol, max_iter=s.max_iter)


def cmd_solve(args) -> dict:
    model = _apply_overrides(_load(args.model), args)
    problem = _build(model)
    t0 = time.perf_counter()
    op, S = _assemble(problem, _workers(args))
    t1 = time.perf_counter()
    opts = _solver_options(model)
    res = _solve(S, opts)
    t2 = time.perf_counter()
    probes = _probe_values(model, problem, op, res)
    bundle = make_bundle(model, problem, S, res, probes, recover_fields(res, S, problem), opts)
    vtk = (problem.patches, S.dofmap, res.x) if (args.vtk or model.output.vtk) else None
    timing = {"assembly_s": t1 - t0, "solve_s": t2 - t1, "threads": _workers(args)}
    try:
        paths = write_results(bundle, args.out, timing=timing, vtk=vtk)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc)) from exc
    return {"status": "ok", "model_hash": bundle["model_hash"], "method": opts.method,
            "n_unknowns": bundle["n_unknowns"], "iterations": res.iterations, "residual": res.residual,
            "probes": {p["id"]: [float(v) for v in p["u"]] for p in probes},
            "files": [str(p) for p in paths]}


def _parse_values(text):
    text = text.strip()
    if ":" in text:
        a, b = text.split(":", 1)
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _with_points(problem, name, n):
    out = []
    hit = False
    for incl in problem.inclusions:
        if name is None or incl.name == name:
            hit = True
            if isinstance(incl, LinearInclusion):
                incl = LinearInclusion(incl.axis, incl.radius, n, incl.material, incl.name)
            elif isinstance(incl, GeneralInclusion):
                grid = (n,) + tuple(incl.grid[1:])
                incl = GeneralInclusion(incl.bottom, incl.top, grid, incl.material, incl.subdivisions, incl.name)
        out.append(incl)
    if not hit:
        raise CliError(EXIT_PARSE, f"no inclusion named {name!r}")
    return dataclasses.replace(problem, inclusions=out)


def cmd_sweep(args) -> dict:
    model = _apply_overrides(_load(args.model), args)
    sw = model.output.sweep
    parameter = args.parameter or (sw.parameter if sw else None)
    if parameter not in ("internal_points", "quadrature_order"):
        raise CliError(EXIT_PARSE, f"invalid sweep parameter {parameter!r}; use internal_points or quadrature_order")
    try:
        values = _parse_values(args.values) if args.values else (list(sw.values) if sw else [])
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"invalid --values: {exc}") from exc
    if not values:
        raise CliError(EXIT_PARSE, "no sweep values given")
    name = args.inclusion or (sw.inclusion if sw else None)
    if parameter == "internal_points" and not model.inclusions:
        raise CliError(EXIT_PARSE, "internal_points sweep needs an inclusion")
    if not model.output.probes:
        raise CliError(EXIT_PARSE, "sweep needs at least one probe point in output.probes")
    opts = _solver_options(model)
    base = _build(model)
    op = None
    rows = []
    workers = _workers(args)
    for v in values:
        if parameter == "internal_points":
            if v < 2:
                raise CliError(EXIT_PARSE, f"internal point count must be >= 2, got {v}")
            problem = _with_points(base, name, v)
        else:
            q = dataclasses.replace(base.quadrature, base_order=v)
            problem = dataclasses.replace(base, quadrature=q)
            op = None
        op, S = _assemble(problem, workers, op)
        res = _solve(S, opts)
        probes = _probe_values(model, problem, op, res)
        rows.append({"value": v, "u": [p["u"] for p in probes]})
        log.info("sweep %s=%d done", parameter, v)
    ids = [p.id for p in model.output.probes]
    try:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "convergence.csv")
        write_convergence_csv(path, rows, ids, model_hash(model))
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc)) from exc
    return {"status": "ok", "model_hash": model_hash(model), "parameter": parameter,
            "rows": [{"value": r["value"], **{i: [float(x) for x in u] for i, u in zip(ids, r["u"])}}
                     for r in rows],
            "files": [path]}


def cmd_verify(args) -> dict:
    from .oracles import run_verify

    reports = run_verify(kernel_scale=args.perturb_kernel)
    ok = all(r.passed for r in reports)
    if not args.json:
        for r in reports:
            print(r.line())
    return {"status": "ok" if ok else "fail",
            "checks": [{"check": r.check, "error": r.error, "tol": r.tol, "passed": r.passed,
                        "residual": r.residual} for r in reports],
            "_exit": EXIT_OK if ok else EXIT_VERIFY}


def cmd_info(args) -> dict:
    model = _load(args.model)
    problem = _build(model)
    try:
        dm = build_dofmap(problem)
    except AssemblyError as exc:
        raise CliError(EXIT_ASSEMBLY, str(exc)) from exc
    info = {
        "name": model.name,
        "model_hash": model_hash(model),
        "material": {"E": model.material.E, "nu": model.material.nu},
        "patches": [{"name": p.name, "degrees": list(s.degrees), "control_net": list(s.shape)}
                    for p, s in zip(model.patches, problem.patches)],
        "displacement_nodes": dm.n_nodes,
        "unknowns": dm.n_unknowns,
        "collocation_points": len(dm.collocation),
        "inclusions": [{"name": i.name, "type": i.kind, "grid_points": i.n_points} for i in problem.inclusions],
        "solver": model.solver.model_dump(),
    }
    if not args.json:
        print(f"model {info['name']} ({info['model_hash'][:12]})")
        print(f"  material E={model.material.E} nu={model.material.nu}")
        for p in info["patches"]:
            print(f"  patch {p['name']}: degrees {p['degrees']}, control net {p['control_net']}")
        print(f"  {info['displacement_nodes']} displacement nodes, {info['unknowns']} unknowns")
        for i in info["inclusions"]:
            print(f"  inclusion {i['name']} ({i['type']}): {i['grid_points']} grid points")
    return info


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="igabem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"igabem {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", help="logging level (default from IGABEM_LOG or WARNING)")
    common.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    common.add_argument("--threads", type=int, default=None, help="worker threads for assembly")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--method", choices=["onestep", "coupled", "newton"])
        sp.add_argument("--tol", type=float)
        sp.add_argument("--max-iter", type=int)
        sp.add_argument("--quad-order", type=int, help="base Gauss order for regular integrals")

    s = sub.add_parser("solve", parents=[common], help="solve a model and write results")
    s.add_argument("model", help="model JSON path or builtin name (example1, example2)")
    s.add_argument("-o", "--out", default="out")
    s.add_argument("--vtk", action="store_true", help="also write boundary.vtk")
    solver_flags(s)

    w = sub.add_parser("sweep", parents=[common], help="solve repeatedly over a parameter")
    w.add_argument("model")
    w.add_argument("--parameter", help="internal_points or quadrature_order")
    w.add_argument("--values", help="range a:b or comma list")
    w.add_argument("--inclusion", help="inclusion whose point count is swept")
    w.add_argument("-o", "--out", default="out")
    solver_flags(w)

    v = sub.add_parser("verify", parents=[common], help="run the built-in oracle checks")
    v.add_argument("--perturb-kernel", type=float, default=1.0, help=argparse.SUPPRESS)

    i = sub.add_parser("info", parents=[common], help="summarise a model")
    i.add_argument("model")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.log_level)
    handlers = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "info": cmd_info}
    try:
        out = handlers[args.command](args)
        code = out.pop("_exit", EXIT_OK)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.json:
            print(json.dumps({"status": "error", "code": exc.code, "message": str(exc)}))
        return exc.code
    if args.json:
        print(json.dumps(out, sort_keys=True))
    elif args.command in ("solve", "sweep"):
        for f in out.get("files", []):
            print(f)
    return code


if __name__ == "__main__":
    sys.exit(main())
