"""Model files (JSON), conversion to solver objects, and result output."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .assembly import AssemblyError, PatchBC, Problem, check_watertight
from .inclusions import GeneralInclusion, LinearInclusion
from .kernels import ElasticConstants
from .nurbs import KnotVector, NurbsError, NurbsSurface, line_curve, refine_surface
from .quadrature import PatchIntegrator, QuadratureOptions

SCHEMA_VERSION = 1
BUILTIN_MODELS = ("example1", "example2")


class ModelError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


Vec3 = tuple[float, float, float]


class MaterialSpec(_Strict):
    E: float = Field(gt=0)
    nu: float = Field(gt=-1, lt=0.5)


class RefineSpec(_Strict):
    elevate: tuple[int, int] = (0, 0)
    insert_u: list[float] = []
    insert_v: list[float] = []


class SurfaceSpec(_Strict):
    name: str
    degrees: tuple[int, int]
    knots_u: list[float]
    knots_v: list[float]
    control_points: list[list[Vec3]]
    weights: Optional[list[list[float]]] = None
    refine: Optional[RefineSpec] = None

    @model_validator(mode="after")
    def _shapes(self):
        nu = len(self.knots_u) - self.degrees[0] - 1
        nv = len(self.knots_v) - self.degrees[1] - 1
        rows = len(self.control_points)
        cols = {len(r) for r in self.control_points}
        if rows != nu or cols != {nv}:
            raise ValueError(f"surface {self.name!r}: control net must be {nu} x {nv} for the given knots")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (nu, nv):
                raise ValueError(f"surface {self.name!r}: weights must be {nu} x {nv}")
            if np.any(w <= 0):
                raise ValueError(f"surface {self.name!r}: weights must be positive")
        return self


class BCSpec(_Strict):
    patch: str
    kind: tuple[Literal["u", "t"], Literal["u", "t"], Literal["u", "t"]]
    value: Vec3


class LinearInclusionSpec(_Strict):
    type: Literal["linear"]
    name: str
    start: Vec3
    end: Vec3
    radius: float = Field(gt=0)
    points: int = Field(ge=2)
    E: float = Field(gt=0)
    nu: float = Field(default=0.0, gt=-1, lt=0.5)


class GeneralInclusionSpec(_Strict):
    type: Literal["general"]
    name: str
    bottom: str
    top: str
    grid: tuple[int, int, int]
    E: float = Field(gt=0)
    nu: float = Field(gt=-1, lt=0.5)
    subdivisions: tuple[int, int, int] = (1, 1, 1)

    @field_validator("grid")
    @classmethod
    def _grid(cls, v):
        if min(v) < 2:
            raise ValueError("grid needs at least 2 points per direction")
        return v


class SolverSpec(_Strict):
    method: Literal["onestep", "coupled", "newton"] = "onestep"
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=200, ge=1)
    sigma_interpolation: Literal["linear", "constant"] = "linear"


class QuadratureSpec(_Strict):
    base_order: int = Field(default=6, ge=1, le=64)
    max_order: int = Field(default=16, ge=1, le=64)
    escalation: float = Field(default=4.0, ge=0)
    near_ratio: float = Field(default=0.5, gt=0)
    max_depth: int = Field(default=14, ge=0)
    singular_order: int = Field(default=12, ge=1, le=64)
    fan_layout: Literal["edges", "split"] = "split"
    volume_base_order: int = Field(default=4, ge=1, le=64)
    volume_singular_order: int = Field(default=8, ge=1, le=64)


class ProbeSpec(_Strict):
    id: str
    x: Vec3


class SweepSpec(_Strict):
    parameter: Literal["internal_points", "quadrature_order"]
    values: list[int]
    inclusion: Optional[str] = None


class OutputSpec(_Strict):
    probes: list[ProbeSpec] = []
    sweep: Optional[SweepSpec] = None
    vtk: bool = False


class ModelFile(_Strict):
    schema_version: Literal[1]
    name: str = ""
    description: str = ""
    material: MaterialSpec
    patches: list[SurfaceSpec]
    surfaces: list[SurfaceSpec] = []
    refine: RefineSpec = RefineSpec()
    bc: list[BCSpec] = []
    inclusions: list[Union[LinearInclusionSpec, GeneralInclusionSpec]] = []
    solver: SolverSpec = SolverSpec()
    quadrature: QuadratureSpec = QuadratureSpec()
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _references(self):
        names = [p.name for p in self.patches]
        if len(set(names)) != len(names):
            raise ValueError("patch names must be unique")
        all_surfaces = set(names) | {s.name for s in self.surfaces}
        for b in self.bc:
            if b.patch not in names:
                raise ValueError(f"bc refers to unknown patch {b.patch!r}")
        seen = set()
        for b in self.bc:
            if b.patch in seen:
                raise ValueError(f"patch {b.patch!r} has more than one bc entry")
            seen.add(b.patch)
        inames = [i.name for i in self.inclusions]
        if len(set(inames)) != len(inames):
            raise ValueError("inclusion names must be unique")
        for inc in self.inclusions:
            if isinstance(inc, GeneralInclusionSpec):
                for ref in (inc.bottom, inc.top):
                    if ref not in all_surfaces:
                        raise ValueError(f"inclusion {inc.name!r} refers to unknown surface {ref!r}")
        probes = [p.id for p in self.output.probes]
        if len(set(probes)) != len(probes):
            raise ValueError("probe ids must be unique")
        sw = self.output.sweep
        if sw is not None and sw.inclusion is not None and sw.inclusion not in inames:
            raise ValueError(f"sweep refers to unknown inclusion {sw.inclusion!r}")
        return self


# ---------------------------------------------------------------- parsing


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {err['loc'][-1]!r}"
        parts.append(f"{loc}: {msg}")
    return "; ".join(parts)


def parse_model(text: str, check_geometry: bool = True) -> ModelFile:
    """Validate model JSON text; raises ModelError with the offending path."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        model = ModelFile.model_validate(data)
    except ValidationError as exc:
        raise ModelError(_format_validation(exc)) from exc
    if check_geometry:
        validate_geometry(model)
    return model


def load_model(source: str | Path) -> ModelFile:
    """Read a model from a path or one of the builtin example names."""
    s = str(source)
    if s in BUILTIN_MODELS and not Path(s).exists():
        text = resources.files("igabem.models").joinpath(f"{s}.json").read_text(encoding="utf-8")
        return parse_model(text)
    path = Path(s)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    return parse_model(text)


def dump_model(model: ModelFile) -> str:
    return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=False) + "\n"


def model_hash(model: ModelFile) -> str:
    canon = json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def build_surface(spec: SurfaceSpec, default_refine: RefineSpec | None = None) -> NurbsSurface:
    try:
        srf = NurbsSurface(
            KnotVector(np.asarray(spec.knots_u, dtype=float), spec.degrees[0]),
            KnotVector(np.asarray(spec.knots_v, dtype=float), spec.degrees[1]),
            np.asarray(spec.control_points, dtype=float),
            None if spec.weights is None else np.asarray(spec.weights, dtype=float),
        )
        ref = spec.refine or default_refine
        if ref is not None:
            srf = refine_surface(srf, ref.elevate, (ref.insert_u, ref.insert_v))
    except NurbsError as exc:
        raise ModelError(f"surface {spec.name!r}: {exc}") from exc
    return srf


def validate_geometry(model: ModelFile) -> None:
    """Watertightness and outward orientation of the boundary."""
    patches = [build_surface(p) for p in model.patches]
    pts = np.vstack([p.flat_control_points() for p in patches])
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if diam == 0:
        raise ModelError("boundary has zero extent")
    try:
        check_watertight(patches, 1e-9 * diam)
    except AssemblyError as exc:
        raise ModelError(str(exc)) from exc
    # divergence theorem: the enclosed volume is positive for outward normals
    vol = 0.0
    for p in patches:
        integ = PatchIntegrator(p)
        x, n, w, _ = integ.quadrature_points(np.full(3, 1e30))
        vol += float(np.sum(w * np.einsum("ij,ij->i", x, n))) / 3.0
    if not vol > 0:
        raise ModelError("patch normals point into the domain; reverse the patch orientation")


def quadrature_options(spec: QuadratureSpec) -> QuadratureOptions:
    return QuadratureOptions(**spec.model_dump())


def build_problem(model: ModelFile) -> Problem:
    mat = ElasticConstants(model.material.E, model.material.nu)
    patches = [build_surface(p, model.refine) for p in model.patches]
    bc_by_patch = {b.patch: b for b in model.bc}
    bcs = []
    for p in model.patches:
        b = bc_by_patch.get(p.name)
        bcs.append(PatchBC() if b is None else PatchBC(tuple(b.kind), tuple(float(v) for v in b.value)))
    surfaces = {s.name: build_surface(s) for s in model.surfaces}
    for p in model.patches:
        surfaces.setdefault(p.name, build_surface(p))
    inclusions = []
    for inc in model.inclusions:
        try:
            if isinstance(inc, LinearInclusionSpec):
                inclusions.append(LinearInclusion(line_curve(inc.start, inc.end), inc.radius, inc.points,
                                                  ElasticConstants(inc.E, inc.nu), inc.name))
            else:
                inclusions.append(GeneralInclusion(surfaces[inc.bottom], surfaces[inc.top], inc.grid,
                                                   ElasticConstants(inc.E, inc.nu), inc.subdivisions, inc.name))
        except ValueError as exc:
            raise ModelError(f"inclusion {inc.name!r}: {exc}") from exc
    return Problem(mat, patches, bcs, inclusions, quadrature_options(model.quadrature),
                   model.solver.sigma_interpolation)


# ---------------------------------------------------------------- results


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            raise ValueError("non-finite value in results")
        s = format(f, ".17g")
        if "e" not in s and "." not in s and "n" not in s:
            s += ".0"
        return s
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, np.ndarray):
        return _fmt(v.tolist())
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(x)}" for k, x in v.items()) + "}"
    raise TypeError(f"cannot serialise {type(v).__name__}")


def results_to_json(bundle: dict) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant digits."""
    lines = ["{"]
    items = list(bundle.items())
    for k, (key, val) in enumerate(items):
        sep = "," if k < len(items) - 1 else ""
        lines.append(f"  {json.dumps(key)}: {_fmt(val)}{sep}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def read_results(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_probes_csv(path: Path, probes: list, model_hash_: str = "") -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "x", "y", "z", "ux", "uy", "uz", "model_hash"])
            for p in probes:
                w.writerow([p["id"], *(_fmt(v) for v in p["x"]), *(_fmt(v) for v in p["u"]), model_hash_])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_convergence_csv(path: Path, rows: list, probe_ids: list, model_hash_: str = "") -> None:
    header = ["value"] + [f"{pid}_{c}" for pid in probe_ids for c in ("ux", "uy", "uz")] + ["model_hash"]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([row["value"], *(_fmt(v) for u in row["u"] for v in u), model_hash_])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_vtk(path: Path, patches, dofmap, x, samples: int = 5, model_hash_: str = "") -> None:
    """Legacy ASCII VTK of the boundary with the displacement field."""
    u_nodes = dofmap.u_known.copy()
    free = dofmap.u_index >= 0
    u_nodes[free] = x[dofmap.u_index[free]]
    pts, disp, quads = [], [], []
    base = 0
    for e, srf in enumerate(patches):
        bu, bv = srf.kv_u.breakpoints(), srf.kv_v.breakpoints()
        gu = np.unique(np.concatenate([np.linspace(bu[i], bu[i + 1], samples) for i in range(len(bu) - 1)]))
        gv = np.unique(np.concatenate([np.linspace(bv[i], bv[i + 1], samples) for i in range(len(bv) - 1)]))
        U, V = np.meshgrid(gu, gv, indexing="ij")
        R, _, _ = srf.basis(U.ravel(), V.ravel())
        pts.append(R @ srf.flat_control_points())
        disp.append(R @ u_nodes[dofmap.patch_nodes[e]])
        nu_, nv_ = len(gu), len(gv)
        for i in range(nu_ - 1):
            for j in range(nv_ - 1):
                a = base + i * nv_ + j
                quads.append((a, a + nv_, a + nv_ + 1, a + 1))
        base += nu_ * nv_
    P = np.vstack(pts)
    Dsp = np.vstack(disp)
    out = ["# vtk DataFile Version 3.0", f"igabem boundary displacement {model_hash_}", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {len(P)} double"]
    out += [" ".join(_fmt(v) for v in p) for p in P]
    out.append(f"CELLS {len(quads)} {5 * len(quads)}")
    out += ["4 " + " ".join(str(i) for i in q) for q in quads]
    out.append(f"CELL_TYPES {len(quads)}")
    out += ["9"] * len(quads)
    out += [f"POINT_DATA {len(P)}", "VECTORS displacement double"]
    out += [" ".join(_fmt(v) for v in d) for d in Dsp]
    _write(path, "\n".join(out) + "\n")


def write_results(bundle: dict, out_dir: str | Path, timing: dict | None = None, vtk=None,
                  convergence=None) -> list[Path]:
    """Write results.json, probes.csv and the optional extras; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    written = []
    p = out / "results.json"
    _write(p, results_to_json(bundle))
    written.append(p)
    p = out / "probes.csv"
    write_probes_csv(p, bundle.get("probes", []), bundle.get("model_hash", ""))
    written.append(p)
    if convergence is not None:
        p = out / "convergence.csv"
        write_convergence_csv(p, convergence["rows"], convergence["probe_ids"], bundle.get("model_hash", ""))
        written.append(p)
    if vtk is not None:
        p = out / "boundary.vtk"
        write_vtk(p, *vtk, model_hash_=bundle.get("model_hash", ""))
        written.append(p)
    if timing is not None:
        p = out / "timing.json"
        _write(p, json.dumps({"model_hash": bundle.get("model_hash", ""), **timing}, indent=2) + "\n")
        written.append(p)
    return written


def make_bundle(model: ModelFile, problem: Problem, S, result, probes: list, fields: dict,
                solver_opts) -> dict:
    """Collect everything that goes into results.json, in a fixed order."""
    grid = []
    for incl, (a, b), stress, force in zip(problem.inclusions, S.grid_offsets, fields["stress"],
                                           fields["bar_force"]):
        entry = {
            "name": incl.name,
            "type": incl.kind,
            "points": S.grid_points[a:b],
            "u": result.u[3 * a: 3 * b].reshape(-1, 3),
            "strain": result.eps[6 * a: 6 * b].reshape(-1, 6),
            "initial_stress": result.s0[6 * a: 6 * b].reshape(-1, 6),
        }
        if isinstance(incl, LinearInclusion):
            entry["axial_force"] = force
        else:
            entry["stress"] = stress
        grid.append(entry)
    return {
        "format": "igabem-results",
        "version": __version__,
        "model_hash": model_hash(model),
        "model_name": model.name,
        "units": "dimensionless",
        "solver": {"method": solver_opts.method, "tol": solver_opts.tol, "max_iter": solver_opts.max_iter,
                   "sigma_interpolation": problem.sigma_mode},
        "quadrature": problem.quadrature.to_dict(),
        "n_unknowns": int(S.dofmap.n_unknowns),
        "n_grid_points": int(S.n_grid),
        "residual": result.residual,
        "iterations": result.iterations,
        "history": list(result.history),
        "x": result.x,
        "inclusions": grid,
        "probes": probes,
    }
