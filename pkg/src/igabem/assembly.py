"""Assembly of the dense system blocks.

Unknowns are boundary displacement coefficients on control points that no
adjacent patch prescribes, plus traction coefficients on Dirichlet patches.
Coincident control points across patch edges share one displacement node;
tractions stay per patch so jumps across edges are representable.

The blocks follow

    L x = r + B0 s0
    u   = Ahat x + cbar + B0bar s0
    eps = Bhat u
    s0  = Delta eps

with ``s0`` the grid values of the initial stress of every inclusion.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .grid_interp import strain_recovery_matrix
from .inclusions import GeneralInclusion, LinearInclusion, bar_frame
from .kernels import ElasticConstants, bar_D_difference, elasticity_matrix
from .nurbs import NurbsSurface, greville_abscissae
from .quadrature import PatchIntegrator, QuadratureOptions, integrate_volume
from .quadrature.bar import bar_block

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-9


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class PatchBC:
    """Per-component boundary condition: kind ``"u"`` (displacement) or ``"t"``
    (traction) with a constant value over the patch."""

    kinds: tuple = ("t", "t", "t")
    values: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.kinds) != 3 or len(self.values) != 3:
            raise ValueError("boundary conditions need three components")
        for k in self.kinds:
            if k not in ("u", "t"):
                raise ValueError(f"boundary condition kind must be 'u' or 't', got {k!r}")


@dataclass
class Problem:
    material: ElasticConstants
    patches: list
    bcs: list
    inclusions: list = field(default_factory=list)
    quadrature: QuadratureOptions = field(default_factory=QuadratureOptions)
    sigma_mode: str = "linear"

    def __post_init__(self):
        if len(self.patches) != len(self.bcs):
            raise ValueError("one boundary condition per patch is required")

    @property
    def diameter(self) -> float:
        pts = np.vstack([p.flat_control_points() for p in self.patches])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


@dataclass
class CollocationPoint:
    x: np.ndarray
    # (patch, (u, v)) for every patch that contains the point
    on_patches: list
    # displacement nodes and weights giving u(x) from an owning patch
    nodes: np.ndarray
    weights: np.ndarray
    # components whose equation is kept, and their row indices
    components: tuple
    rows: tuple


@dataclass
class DofMap:
    patch_nodes: list
    node_xyz: np.ndarray
    u_index: np.ndarray
    u_known: np.ndarray
    t_offset: list
    t_index: list
    t_known: list
    collocation: list
    n_unknowns: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_xyz)

    @property
    def n_traction(self) -> int:
        return sum(len(t) for t in self.t_index)

    def describe_unknown(self, k: int) -> str:
        hit = np.argwhere(self.u_index == k)
        if len(hit):
            g, c = hit[0]
            return f"u[node {g}, comp {c}]"
        for e, ti in enumerate(self.t_index):
            hit = np.argwhere(ti == k)
            if len(hit):
                i, c = hit[0]
                return f"t[patch {e}, basis {i}, comp {c}]"
        raise IndexError(k)


def identify_nodes(patches, tol: float):
    """Cluster coincident control points; returns per-patch node ids and coordinates."""
    coords = []
    patch_nodes = []
    for srf in patches:
        ids = []
        for p in srf.flat_control_points():
            match = -1
            for g, q in enumerate(coords):
                if np.linalg.norm(p - q) <= tol:
                    match = g
                    break
            if match < 0:
                coords.append(p.copy())
                match = len(coords) - 1
            ids.append(match)
        patch_nodes.append(np.array(ids, dtype=int))
    return patch_nodes, np.array(coords)


def check_watertight(patches, tol: float) -> None:
    """Every patch edge must be matched by an edge of another patch."""
    edges = []
    for e, srf in enumerate(patches):
        P = srf.control_points
        for name, pts in (("v=0", P[:, 0]), ("v=1", P[:, -1]), ("u=0", P[0, :]), ("u=1", P[-1, :])):
            edges.append((e, name, pts))
    for k, (e, name, pts) in enumerate(edges):
        ok = False
        for m, (f, _, q) in enumerate(edges):
            if m == k or f == e or len(q) != len(pts):
                continue
            if np.all(np.linalg.norm(pts - q, axis=1) <= tol) or np.all(np.linalg.norm(pts - q[::-1], axis=1) <= tol):
                ok = True
                break
        if not ok:
            raise AssemblyError(f"boundary is not watertight: edge {name} of patch {e} has no conforming neighbour")


def _greville_params(srf: NurbsSurface):
    gu = greville_abscissae(srf.kv_u)
    gv = greville_abscissae(srf.kv_v)
    return np.array([(a, b) for a in gu for b in gv])


def _inward_shift(srf: NurbsSurface, uv, frac: float = 0.1):
    out = np.array(uv, dtype=float)
    for d, kv in enumerate((srf.kv_u, srf.kv_v)):
        bp = kv.breakpoints()
        if out[d] <= bp[0] + 1e-12:
            out[d] = bp[0] + frac * (bp[1] - bp[0])
        elif out[d] >= bp[-1] - 1e-12:
            out[d] = bp[-1] - frac * (bp[-1] - bp[-2])
    return out


def build_dofmap(problem: Problem) -> DofMap:
    patches = problem.patches
    tol = BOUNDARY_TOL * problem.diameter
    check_watertight(patches, tol)
    patch_nodes, node_xyz = identify_nodes(patches, tol)
    n_nodes = len(node_xyz)

    # displacement knowns
    u_known = np.full((n_nodes, 3), np.nan)
    dirichlet = [[[] for _ in range(3)] for _ in range(n_nodes)]
    for e, bc in enumerate(problem.bcs):
        for c in range(3):
            if bc.kinds[c] != "u":
                continue
            for i, g in enumerate(patch_nodes[e]):
                if dirichlet[g][c] and not np.isclose(u_known[g, c], bc.values[c], rtol=1e-12, atol=1e-14):
                    raise AssemblyError(
                        f"conflicting prescribed displacement at node {g} component {c} "
                        f"(patches {dirichlet[g][c][0][0]} and {e})"
                    )
                u_known[g, c] = bc.values[c]
                dirichlet[g][c].append((e, i))

    k = 0
    u_index = np.full((n_nodes, 3), -1, dtype=int)
    for g in range(n_nodes):
        for c in range(3):
            if not dirichlet[g][c]:
                u_index[g, c] = k
                k += 1
    t_index, t_known, t_offset = [], [], []
    off = 0
    for e, (srf, bc) in enumerate(zip(patches, problem.bcs)):
        nb = srf.n_basis
        ti = np.full((nb, 3), -1, dtype=int)
        tk = np.zeros((nb, 3))
        for c in range(3):
            if bc.kinds[c] == "u":
                ti[:, c] = np.arange(k, k + nb)
                k += nb
                tk[:, c] = np.nan
            else:
                tk[:, c] = bc.values[c]
        t_index.append(ti)
        t_known.append(tk)
        t_offset.append(off)
        off += nb

    # collocation at Greville images of the displacement nodes
    greville = [_greville_params(s) for s in patches]
    occurrences = [[] for _ in range(n_nodes)]
    for e, ids in enumerate(patch_nodes):
        for i, g in enumerate(ids):
            occurrences[g].append((e, i))
    colloc = []
    row = 0
    for g in range(n_nodes):
        e0, i0 = occurrences[g][0]
        uv0 = greville[e0][i0]
        x = patches[e0].evaluate(uv0[:1], uv0[1:])[0]
        on = []
        for e, i in occurrences[g]:
            uv = greville[e][i]
            xe = patches[e].evaluate(uv[:1], uv[1:])[0]
            if np.linalg.norm(xe - x) > tol:
                raise AssemblyError(
                    f"patches {e0} and {e} are not parametrically conforming at node {g}"
                )
            on.append((e, tuple(uv)))
        nodes, weights = _node_weights(patches[e0], patch_nodes[e0], uv0)
        colloc.append(CollocationPoint(x, on, nodes, weights, (0, 1, 2), (row, row + 1, row + 2)))
        row += 3
    # extra points where several Dirichlet patches meet in one component
    for g in range(n_nodes):
        for c in range(3):
            for e, i in dirichlet[g][c][1:]:
                uv = _inward_shift(patches[e], greville[e][i])
                x = patches[e].evaluate(uv[:1], uv[1:])[0]
                nodes, weights = _node_weights(patches[e], patch_nodes[e], uv)
                colloc.append(CollocationPoint(x, [(e, tuple(uv))], nodes, weights, (c,), (row,)))
                row += 1
    if row != k:
        raise AssemblyError(f"equation count {row} does not match unknown count {k}")
    return DofMap(patch_nodes, node_xyz, u_index, u_known, t_offset, t_index, t_known, colloc, k)


def _node_weights(srf: NurbsSurface, ids, uv):
    R, _, _ = srf.basis(np.array([uv[0]]), np.array([uv[1]]))
    R = R[0]
    nz = np.nonzero(np.abs(R) > 0)[0]
    return ids[nz], R[nz]


# ---------------------------------------------------------------- kernels at a source


def boundary_influence(source, integrators, dofmap: DofMap, mat: ElasticConstants, on_patches=(),
                       weights=None):
    """Dense H (3 x 3*n_nodes) and G (3 x 3*n_traction) for one source point.

    For a collocation point, ``on_patches`` lists the patches that contain it
    and ``weights`` = (nodes, values) express u(source); the integrand is then
    regularised so constant displacements are annihilated.
    """
    H = np.zeros((3, 3 * dofmap.n_nodes))
    G = np.zeros((3, 3 * dofmap.n_traction))
    on = dict(on_patches)
    for e, integ in enumerate(integrators):
        Ub, Tb = integ.integrate(source, mat, singular_at=on.get(e))
        if weights is not None and e not in on:
            Ttot = Tb.sum(axis=0)
            for g, w in zip(*weights):
                H[:, 3 * g: 3 * g + 3] -= w * Ttot
        for i, g in enumerate(dofmap.patch_nodes[e]):
            H[:, 3 * g: 3 * g + 3] += Tb[i]
        o = 3 * dofmap.t_offset[e]
        G[:, o: o + 3 * len(Ub)] = Ub.transpose(1, 0, 2).reshape(3, -1)
    return H, G


def _split_known(H, G, dofmap: DofMap):
    """Map H, G onto unknown columns of L-like rows: returns (Lrow, rhs) for
    the identity H u - G t = ..."""
    nr = H.shape[0]
    Lrow = np.zeros((nr, dofmap.n_unknowns))
    rhs = np.zeros(nr)
    ui = dofmap.u_index.ravel()
    uk = dofmap.u_known.ravel()
    free = ui >= 0
    Lrow[:, ui[free]] += H[:, free]
    rhs -= H[:, ~free] @ uk[~free]
    ti = np.concatenate([t.ravel() for t in dofmap.t_index])
    tk = np.concatenate([t.ravel() for t in dofmap.t_known])
    unk = ti >= 0
    Lrow[:, ti[unk]] -= G[:, unk]
    rhs += G[:, ~unk] @ tk[~unk]
    return Lrow, rhs


def inclusion_influence(source, inclusions, mat: ElasticConstants, opts: QuadratureOptions, mode: str,
                        own=None):
    """3 x 6M block of int E M_j dV for all inclusions with the given source.

    ``own`` = (inclusion index, local coordinates) marks the source as a grid
    point of that inclusion.
    """
    blocks = []
    source = np.asarray(source, dtype=float)
    for m, incl in enumerate(inclusions):
        if isinstance(incl, LinearInclusion):
            out = np.zeros((3, 6 * incl.n_points))
            frame = bar_frame(incl, source)
            for k, sub in enumerate(incl.subregions()):
                blk = 0.5 * bar_block(incl, sub, source, mat, frame)
                out[:, 6 * k: 6 * k + 6] += blk
                out[:, 6 * k + 6: 6 * k + 12] += blk
            blocks.append(out)
            continue
        local = None
        if own is not None and own[0] == m:
            local = own[1]
        else:
            local = _locate_in_inclusion(incl, source)
        V = integrate_volume(incl, source, mat, source_local=local, opts=opts, mode=mode)
        blocks.append(V.transpose(1, 0, 2).reshape(3, -1))
    if not blocks:
        return np.zeros((3, 0))
    return np.hstack(blocks)


def _locate_in_inclusion(incl: GeneralInclusion, x):
    lo, hi = incl.bounding_box()
    pad = 1e-9 * np.linalg.norm(hi - lo)
    if np.any(x < lo - pad) or np.any(x > hi + pad):
        return None
    return incl.inverse_map(x)


def locate_on_patch(srf: NurbsSurface, x, tol: float, max_iter: int = 40):
    """Parameters (u, v) of the point of ``srf`` closest to x, or None if the
    distance exceeds ``tol``."""
    x = np.asarray(x, dtype=float)
    g = np.linspace(0.0, 1.0, 11)
    U, V = np.meshgrid(g, g, indexing="ij")
    pts = srf.evaluate(U.ravel(), V.ravel())
    k = int(np.argmin(np.linalg.norm(pts - x, axis=1)))
    uv = np.array([U.ravel()[k], V.ravel()[k]])
    for _ in range(max_iter):
        p, pu, pv = srf.evaluate(uv[:1], uv[1:], derivatives=True)
        J = np.column_stack([pu[0], pv[0]])
        step, *_ = np.linalg.lstsq(J, x - p[0], rcond=None)
        uv_new = np.clip(uv + step, 0.0, 1.0)
        if np.linalg.norm(uv_new - uv) < 1e-15:
            break
        uv = uv_new
    p = srf.evaluate(uv[:1], uv[1:])[0]
    if np.linalg.norm(p - x) > tol:
        return None
    return uv


# ---------------------------------------------------------------- system


@dataclass
class BoundaryOperator:
    problem_key: tuple
    dofmap: DofMap
    L: np.ndarray
    r: np.ndarray
    integrators: list


@dataclass
class SystemMatrices:
    dofmap: DofMap
    L: np.ndarray
    r: np.ndarray
    B0: np.ndarray
    Ahat: np.ndarray
    cbar: np.ndarray
    B0bar: np.ndarray
    Bhat: np.ndarray
    Delta: np.ndarray
    grid_points: np.ndarray
    # grid point index ranges per inclusion
    grid_offsets: list
    boundary_grid: list

    @property
    def n_grid(self) -> int:
        return len(self.grid_points)


def _map_rows(fn, items, workers: int | None):
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _boundary_key(problem: Problem):
    return (
        tuple(id(p) for p in problem.patches),
        tuple(problem.bcs),
        problem.material,
        problem.quadrature,
    )


def assemble_boundary(problem: Problem, workers: int | None = None) -> BoundaryOperator:
    """L and r from the boundary discretisation alone."""
    dofmap = build_dofmap(problem)
    integrators = [PatchIntegrator(s, problem.quadrature) for s in problem.patches]
    mat = problem.material

    def row(cp: CollocationPoint):
        H, G = boundary_influence(cp.x, integrators, dofmap, mat, cp.on_patches, (cp.nodes, cp.weights))
        Lr, rr = _split_known(H, G, dofmap)
        return Lr[list(cp.components)], rr[list(cp.components)]

    rows = _map_rows(row, dofmap.collocation, workers)
    L = np.vstack([a for a, _ in rows])
    r = np.concatenate([b for _, b in rows])
    log.info("boundary operator: %d unknowns, %d collocation points", dofmap.n_unknowns, len(dofmap.collocation))
    return BoundaryOperator(_boundary_key(problem), dofmap, L, r, integrators)


def assemble_L_r(problem: Problem, workers: int | None = None):
    op = assemble_boundary(problem, workers)
    return op.L, op.r


def assemble_B0(problem: Problem, dofmap: DofMap, workers: int | None = None) -> np.ndarray:
    n_cols = 6 * sum(i.n_points for i in problem.inclusions)
    if not problem.inclusions:
        return np.zeros((dofmap.n_unknowns, 0))
    mat, opts, mode = problem.material, problem.quadrature, problem.sigma_mode

    def row(cp: CollocationPoint):
        blk = inclusion_influence(cp.x, problem.inclusions, mat, opts, mode)
        return blk[list(cp.components)]

    B0 = np.vstack(_map_rows(row, dofmap.collocation, workers))
    assert B0.shape[1] == n_cols
    return B0


def grid_layout(problem: Problem):
    pts, offsets, local = [], [], []
    off = 0
    for m, incl in enumerate(problem.inclusions):
        loc, x = incl.grid_points()
        pts.append(x)
        offsets.append((off, off + incl.n_points))
        for k in range(incl.n_points):
            local.append((m, loc[k]))
        off += incl.n_points
    if not pts:
        return np.zeros((0, 3)), offsets, local
    return np.vstack(pts), offsets, local


def assemble_interior(problem: Problem, op: BoundaryOperator, workers: int | None = None):
    """Ahat, cbar, B0bar and the list of boundary-coincident grid points."""
    dofmap = op.dofmap
    pts, _, local = grid_layout(problem)
    P = len(pts)
    n6 = 6 * P
    tol = BOUNDARY_TOL * problem.diameter
    mat, opts, mode = problem.material, problem.quadrature, problem.sigma_mode

    def row(k):
        x = pts[k]
        for e, srf in enumerate(problem.patches):
            uv = locate_on_patch(srf, x, tol)
            if uv is None:
                continue
            nodes, w = _node_weights(srf, dofmap.patch_nodes[e], uv)
            A = np.zeros((3, dofmap.n_unknowns))
            c = np.zeros(3)
            for g, wg in zip(nodes, w):
                for comp in range(3):
                    j = dofmap.u_index[g, comp]
                    if j >= 0:
                        A[comp, j] += wg
                    else:
                        c[comp] += wg * dofmap.u_known[g, comp]
            return A, c, np.zeros((3, n6)), (e, tuple(uv))
        H, G = boundary_influence(x, op.integrators, dofmap, mat)
        # the summed traction kernel is -I inside the domain and 0 outside
        Tsum = H.reshape(3, -1, 3).sum(axis=1)
        if abs(np.trace(Tsum) / 3.0 + 1.0) > 0.5:
            raise AssemblyError(f"grid point {k} at {np.round(x, 6).tolist()} lies outside the domain")
        Lr, rr = _split_known(H, G, dofmap)
        m, s_loc = local[k]
        own = (m, s_loc) if isinstance(problem.inclusions[m], GeneralInclusion) else None
        Bb = inclusion_influence(x, problem.inclusions, mat, opts, mode, own=own)
        # u = int U t - int T u + int E s0
        return -Lr, rr, Bb, None

    rows = _map_rows(row, list(range(P)), workers)
    if not rows:
        return np.zeros((0, dofmap.n_unknowns)), np.zeros(0), np.zeros((0, 0)), []
    Ahat = np.vstack([a for a, _, _, _ in rows])
    cbar = np.concatenate([c for _, c, _, _ in rows])
    B0bar = np.vstack([b for _, _, b, _ in rows])
    boundary = [(k, hit) for k, (_, _, _, hit) in enumerate(rows) if hit is not None]
    return Ahat, cbar, B0bar, boundary


def stack_Bhat(problem: Problem) -> np.ndarray:
    mats = [strain_recovery_matrix(incl) for incl in problem.inclusions]
    if not mats:
        return np.zeros((0, 0))
    return block_diag(*mats)


def delta_matrix(problem: Problem) -> np.ndarray:
    """Block-diagonal (D - D_incl) acting on grid strains."""
    blocks = []
    D = elasticity_matrix(problem.material)
    for incl in problem.inclusions:
        if isinstance(incl, LinearInclusion):
            d = bar_D_difference(problem.material.E, incl.material.E)
        else:
            d = D - elasticity_matrix(incl.material)
        blocks.extend([d] * incl.n_points)
    if not blocks:
        return np.zeros((0, 0))
    return block_diag(*blocks)


def assemble_system(problem: Problem, boundary: BoundaryOperator | None = None,
                    workers: int | None = None) -> SystemMatrices:
    """All blocks; a previously assembled boundary operator is reused when it
    belongs to the same boundary discretisation."""
    if boundary is None or boundary.problem_key != _boundary_key(problem):
        boundary = assemble_boundary(problem, workers)
    dofmap = boundary.dofmap
    B0 = assemble_B0(problem, dofmap, workers)
    Ahat, cbar, B0bar, bnd = assemble_interior(problem, boundary, workers)
    pts, offsets, _ = grid_layout(problem)
    return SystemMatrices(
        dofmap=dofmap,
        L=boundary.L,
        r=boundary.r,
        B0=B0,
        Ahat=Ahat,
        cbar=cbar,
        B0bar=B0bar,
        Bhat=stack_Bhat(problem),
        Delta=delta_matrix(problem),
        grid_points=pts,
        grid_offsets=offsets,
        boundary_grid=bnd,
    )


def displacement_at(points, x, problem: Problem, op: BoundaryOperator, s0=None):
    """Displacements at arbitrary points from a solved boundary vector ``x``.

    Points on the boundary use the patch basis; interior points the integral
    representation including the inclusion contribution of ``s0``.
    """
    dofmap = op.dofmap
    u_nodes = dofmap.u_known.copy()
    free = dofmap.u_index >= 0
    u_nodes[free] = x[dofmap.u_index[free]]
    tol = BOUNDARY_TOL * problem.diameter
    out = []
    for p in np.atleast_2d(points):
        done = False
        for e, srf in enumerate(problem.patches):
            uv = locate_on_patch(srf, p, tol)
            if uv is not None:
                nodes, w = _node_weights(srf, dofmap.patch_nodes[e], uv)
                out.append(w @ u_nodes[nodes])
                done = True
                break
        if done:
            continue
        H, G = boundary_influence(p, op.integrators, dofmap, problem.material)
        Lr, rr = _split_known(H, G, dofmap)
        u = -(Lr @ x) + rr
        if s0 is not None and len(s0):
            u = u + inclusion_influence(p, problem.inclusions, problem.material, problem.quadrature,
                                        problem.sigma_mode) @ s0
        out.append(u)
    return np.array(out)
