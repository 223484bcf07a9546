"""Integration of the U and T kernels over NURBS boundary patches.

Each patch is split into its knot-span elements. Elements that contain the
collocation point are integrated with a fan of collapsed triangles about that
point; the Jacobian of the collapsed map vanishes at the point and cancels the
weak singularity. All other elements use tensor Gauss rules whose order grows
as the source approaches, with recursive subdivision in the near field.
"""

from __future__ import annotations

import numpy as np

from ..kernels import ElasticConstants, kelvin_T, kelvin_U
from ..nurbs import NurbsSurface
from .gauss import box_rule_2d, unit_rule
from .options import QuadratureOptions


class QuadratureError(RuntimeError):
    pass


def triangle_rule(p, a, b, n: int):
    """Collapsed-quadrilateral rule on the triangle (p, a, b), singular at p."""
    x, w = unit_rule(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    WX = np.outer(w, w)
    p, a, b = (np.asarray(q, dtype=float) for q in (p, a, b))
    e0 = a - p
    e1 = b - a
    det = abs(e0[0] * e1[1] - e0[1] * e1[0])
    pts = p + X[..., None] * (e0 + Y[..., None] * e1)
    return pts[..., 0].ravel(), pts[..., 1].ravel(), (WX * X * det).ravel()


def fan_rule(lo, hi, p, n: int, layout: str = "edges"):
    """Rule on the rectangle [lo, hi] built from triangles with apex at ``p``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    p = np.asarray(p, dtype=float)
    if layout == "split":
        us = sorted({lo[0], float(np.clip(p[0], lo[0], hi[0])), hi[0]})
        vs = sorted({lo[1], float(np.clip(p[1], lo[1], hi[1])), hi[1]})
        parts = [fan_rule((us[i], vs[j]), (us[i + 1], vs[j + 1]), p, n, "edges")
                 for i in range(len(us) - 1) for j in range(len(vs) - 1)]
        return tuple(np.concatenate(c) for c in zip(*parts))
    if layout != "edges":
        raise ValueError(f"unknown fan layout {layout!r}")
    corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    area = (hi[0] - lo[0]) * (hi[1] - lo[1])
    us, vs, ws = [], [], []
    for k in range(4):
        a = np.array(corners[k])
        b = np.array(corners[(k + 1) % 4])
        e0, e1 = a - p, b - a
        if abs(e0[0] * e1[1] - e0[1] * e1[0]) <= 1e-12 * area:
            continue
        u, v, w = triangle_rule(p, a, b, n)
        us.append(u)
        vs.append(v)
        ws.append(w)
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ws)


class PatchIntegrator:
    """Kernel integrals over one patch against each of its basis functions."""

    def __init__(self, surface: NurbsSurface, opts: QuadratureOptions | None = None):
        self.srf = surface
        self.opts = opts or QuadratureOptions()
        bu = surface.kv_u.breakpoints()
        bv = surface.kv_v.breakpoints()
        self.elements = [((bu[i], bv[j]), (bu[i + 1], bv[j + 1]))
                         for i in range(len(bu) - 1) for j in range(len(bv) - 1)]
        self._cache: dict = {}
        self._P = surface.flat_control_points()

    @property
    def n_basis(self) -> int:
        return self.srf.n_basis

    def geometry(self, u, v):
        """Points, unit normals, area Jacobians and basis values at (u, v)."""
        R, Ru, Rv = self.srf.basis(u, v)
        x = R @ self._P
        cross = np.cross(Ru @ self._P, Rv @ self._P)
        jac = np.linalg.norm(cross, axis=1)
        if np.any(jac <= 0):
            raise QuadratureError("degenerate surface Jacobian inside patch")
        return x, cross / jac[:, None], jac, R

    def _box_metrics(self, lo, hi, source):
        g = np.linspace(0.0, 1.0, 5)
        U, V = np.meshgrid(lo[0] + g * (hi[0] - lo[0]), lo[1] + g * (hi[1] - lo[1]), indexing="ij")
        pts = self.srf.evaluate(U.ravel(), V.ravel())
        pts = pts.reshape(5, 5, 3)
        L = max(np.linalg.norm(pts[0, 0] - pts[-1, -1]), np.linalg.norm(pts[-1, 0] - pts[0, -1]))
        d = np.min(np.linalg.norm(pts.reshape(-1, 3) - source, axis=1))
        return L, d

    def _regular_boxes(self, lo, hi, source, depth=0):
        L, d = self._box_metrics(lo, hi, source)
        o = self.opts
        if d < o.near_ratio * L:
            if depth >= o.max_depth:
                raise QuadratureError(
                    "near-singular subdivision exceeded maximum depth; source lies on the surface?"
                )
            mu = 0.5 * (lo[0] + hi[0])
            mv = 0.5 * (lo[1] + hi[1])
            out = []
            for a, b in (((lo[0], lo[1]), (mu, mv)), ((mu, lo[1]), (hi[0], mv)),
                         ((lo[0], mv), (mu, hi[1])), ((mu, mv), (hi[0], hi[1]))):
                out.extend(self._regular_boxes(a, b, source, depth + 1))
            return out
        return [(lo, hi, o.order_for(L, d), depth)]

    def _cached(self, e: int, order: int):
        key = (e, order)
        if key not in self._cache:
            lo, hi = self.elements[e]
            u, v, w = box_rule_2d(lo, hi, order)
            x, n, jac, R = self.geometry(u, v)
            self._cache[key] = (x, n, w * jac, R)
        return self._cache[key]

    def quadrature_points(self, source, singular_at=None):
        """Gather points, normals, weights (with Jacobian) and basis values."""
        source = np.asarray(source, dtype=float)
        cached, fresh = [], []
        for e, (lo, hi) in enumerate(self.elements):
            if singular_at is not None and _in_box(singular_at, lo, hi):
                fresh.append(fan_rule(lo, hi, singular_at, self.opts.singular_order, self.opts.fan_layout))
                continue
            for blo, bhi, order, depth in self._regular_boxes(lo, hi, source):
                if depth == 0:
                    cached.append(self._cached(e, order))
                else:
                    fresh.append(box_rule_2d(blo, bhi, order))
        parts = list(cached)
        if fresh:
            u = np.concatenate([f[0] for f in fresh])
            v = np.concatenate([f[1] for f in fresh])
            w = np.concatenate([f[2] for f in fresh])
            x, n, jac, R = self.geometry(u, v)
            parts.append((x, n, w * jac, R))
        return tuple(np.concatenate(c) for c in zip(*parts))

    def integrate(self, source, mat: ElasticConstants, singular_at=None):
        """Return (U_blocks, T_blocks), each of shape (n_basis, 3, 3).

        U_blocks[i] = int U R_i dG. With ``singular_at`` = (u, v) of the source
        on this patch, T_blocks[i] = int T (R_i - R_i(u, v)) dG; otherwise
        T_blocks[i] = int T R_i dG.
        """
        x, n, wj, R = self.quadrature_points(source, singular_at)
        U = kelvin_U(source, x, mat)
        T = kelvin_T(source, x, n, mat)
        Ub = np.einsum("g,gij,gb->bij", wj, U, R)
        if singular_at is not None:
            Rp, _, _ = self.srf.basis(singular_at[0], singular_at[1])
            R = R - Rp
        Tb = np.einsum("g,gij,gb->bij", wj, T, R)
        return Ub, Tb

    def integrate_T_total(self, source, mat: ElasticConstants) -> np.ndarray:
        """int T dG over the patch for a source off the patch."""
        x, n, wj, _ = self.quadrature_points(source)
        return np.einsum("g,gij->ij", wj, kelvin_T(source, x, n, mat))

    def integrate_scalar(self, f, source=None) -> float:
        """Integrate a scalar function of position over the patch."""
        far = np.array([1e30, 1e30, 1e30]) if source is None else source
        x, n, wj, _ = self.quadrature_points(far)
        return float(np.sum(wj * f(x)))


def _in_box(p, lo, hi, tol: float = 1e-12) -> bool:
    return (lo[0] - tol <= p[0] <= hi[0] + tol) and (lo[1] - tol <= p[1] <= hi[1] + tol)
