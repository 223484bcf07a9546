"""Volume integration of the strain kernel over general inclusions."""

from __future__ import annotations

from itertools import product

import numpy as np

from ..grid_interp import sigma_interpolation_matrix
from ..inclusions import Cell, GeneralInclusion
from ..kernels import ElasticConstants, kernel_E
from .gauss import box_rule_3d, unit_rule
from .options import QuadratureOptions
from .surface import QuadratureError


def region_rule(cell: Cell, n: int):
    """Gauss points of one integration region in local coordinates.

    Weights include the affine Jacobian (size product / 8).
    """
    return box_rule_3d(cell.corner, cell.corner + cell.size, n)


def pyramid_rule(base, apex, n: int):
    """Points and weights for the collapsed map onto a quad base with apex.

    s(sigma, tau, rho) = (1 - rho) s0(sigma, tau) + rho * apex, where s0 is the
    bilinear map onto ``base`` (4 corners, counter-clockwise). The Jacobian
    carries a factor (1 - rho)^2 and vanishes at the apex.
    """
    base = np.asarray(base, dtype=float)
    apex = np.asarray(apex, dtype=float)
    x, w = unit_rule(n)
    S, T, Rh = (a.ravel() for a in np.meshgrid(x, x, x, indexing="ij"))
    W = np.einsum("i,j,k->ijk", w, w, w).ravel()
    N = np.stack([(1 - S) * (1 - T), S * (1 - T), S * T, (1 - S) * T], axis=1)
    dNs = np.stack([-(1 - T), 1 - T, T, -T], axis=1)
    dNt = np.stack([-(1 - S), -S, S, 1 - S], axis=1)
    s0 = N @ base
    ds0 = dNs @ base
    dt0 = dNt @ base
    pts = (1 - Rh)[:, None] * s0 + Rh[:, None] * apex
    det = np.abs(np.linalg.det(np.stack([ds0, dt0, apex - s0], axis=1))) * (1 - Rh) ** 2
    return pts, W * det


def corner_pyramids(lo, hi, corner):
    """Split the box [lo, hi] into pyramids with apex at one of its corners.

    Returns a list of (base quad, apex); one pyramid per face not touching
    the apex corner.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corner = np.asarray(corner, dtype=float)
    out = []
    for d in range(3):
        # the face opposite the apex in direction d
        at_lo = np.isclose(corner[d], lo[d])
        face_val = hi[d] if at_lo else lo[d]
        a, b = [k for k in range(3) if k != d]
        quad = []
        for ua, ub in ((lo[a], lo[b]), (hi[a], lo[b]), (hi[a], hi[b]), (lo[a], hi[b])):
            q = np.empty(3)
            q[d], q[a], q[b] = face_val, ua, ub
            quad.append(q)
        out.append((np.array(quad), corner.copy()))
    return out


def singular_region_rule(cell: Cell, s_src, n: int):
    """Rule for a region containing the source: split so the source is a corner
    of every sub-box, then decompose each sub-box into pyramids."""
    lo = cell.corner
    hi = cell.corner + cell.size
    s_src = np.clip(np.asarray(s_src, dtype=float), lo, hi)
    cuts = [sorted({lo[d], s_src[d], hi[d]}) for d in range(3)]
    pts, wts = [], []
    for i, j, k in product(*(range(len(c) - 1) for c in cuts)):
        blo = np.array([cuts[0][i], cuts[1][j], cuts[2][k]])
        bhi = np.array([cuts[0][i + 1], cuts[1][j + 1], cuts[2][k + 1]])
        if np.any(bhi - blo <= 1e-14):
            continue
        for base, apex in corner_pyramids(blo, bhi, s_src):
            p, w = pyramid_rule(base, apex, n)
            pts.append(p)
            wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


def _regular_boxes(incl: GeneralInclusion, lo, hi, source, opts: QuadratureOptions, depth=0):
    g = np.linspace(0.0, 1.0, 3)
    S = np.array(list(product(g, g, g))) * (hi - lo) + lo
    pts, _, _ = incl.map(S[:, 0], S[:, 1], S[:, 2])
    L = max(np.linalg.norm(pts[i] - pts[26 - i]) for i in (0, 2, 6, 8))
    d = np.min(np.linalg.norm(pts - source, axis=1))
    if d < opts.near_ratio * L:
        if depth >= opts.max_depth:
            raise QuadratureError("volume subdivision exceeded maximum depth; source inside region?")
        mid = 0.5 * (lo + hi)
        out = []
        for c in product((0, 1), repeat=3):
            c = np.array(c)
            out.extend(_regular_boxes(incl, np.where(c, mid, lo), np.where(c, hi, mid), source, opts, depth + 1))
        return out
    return [(lo, hi, opts.volume_order_for(L, d))]


def regular_region_points(incl: GeneralInclusion, cell: Cell, source, opts: QuadratureOptions):
    pts, wts = [], []
    for lo, hi, order in _regular_boxes(incl, cell.corner, cell.corner + cell.size, np.asarray(source), opts):
        p, w = box_rule_3d(lo, hi, order)
        pts.append(p)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


def integrate_volume(incl: GeneralInclusion, source, mat: ElasticConstants, source_local=None,
                     opts: QuadratureOptions | None = None, mode: str = "linear", kernel=None) -> np.ndarray:
    """Blocks int E(source, x) M_j(x) dV for every grid point j, shape (M, 3, 6).

    ``source_local`` are the local coordinates of the source when it lies in
    or on the inclusion; regions containing it use the singular rule.
    """
    opts = opts or QuadratureOptions()
    kernel = kernel or (lambda src, x: kernel_E(src, x, mat))
    source = np.asarray(source, dtype=float)
    S_all, W_all = [], []
    for cell in incl.cells():
        if source_local is not None and cell.contains(source_local):
            S, W = singular_region_rule(cell, source_local, opts.volume_singular_order)
        else:
            S, W = regular_region_points(incl, cell, source, opts)
        S_all.append(S)
        W_all.append(W)
    S = np.concatenate(S_all)
    W = np.concatenate(W_all)
    x, _, det = incl.map(S[:, 0], S[:, 1], S[:, 2])
    E = kernel(source, x)
    Msig = sigma_interpolation_matrix(incl, S, mode)
    return np.einsum("g,gij,gm->mij", W * det, E, Msig)


def integrate_volume_regular(incl: GeneralInclusion, cell: Cell, source, mat: ElasticConstants, j: int,
                             opts: QuadratureOptions | None = None, mode: str = "linear") -> np.ndarray:
    """3x6 contribution of one region to the block of grid point j."""
    opts = opts or QuadratureOptions()
    S, W = regular_region_points(incl, cell, source, opts)
    x, _, det = incl.map(S[:, 0], S[:, 1], S[:, 2])
    M = sigma_interpolation_matrix(incl, S, mode)[:, j]
    return np.einsum("g,gij->ij", W * det * M, kernel_E(source, x, mat))


def integrate_volume_singular(incl: GeneralInclusion, cell: Cell, source_local, mat: ElasticConstants, j: int,
                              n: int = 8, mode: str = "linear") -> np.ndarray:
    S, W = singular_region_rule(cell, source_local, n)
    x, _, det = incl.map(S[:, 0], S[:, 1], S[:, 2])
    src, _, _ = incl.map_point(source_local)
    M = sigma_interpolation_matrix(incl, S, mode)[:, j]
    return np.einsum("g,gij->ij", W * det * M, kernel_E(src, x, mat))
