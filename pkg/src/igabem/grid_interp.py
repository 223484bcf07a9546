"""Interpolation on inclusion grids and strain recovery.

Displacements between grid points are interpolated with piecewise linear (two
points in a direction) or quadratic shape functions; strains at grid points are
obtained by differentiating that interpolation. Initial stresses are
interpolated separately (``sigma_interpolation``).
"""

from __future__ import annotations

import numpy as np

from .inclusions import GeneralInclusion, LinearInclusion, LocalFrame


def shape_linear(xi: float):
    values = np.array([0.5 * (1.0 - xi), 0.5 * (1.0 + xi)])
    derivs = np.array([-0.5, 0.5])
    return values, derivs


def shape_quadratic(xi: float):
    m2 = 1.0 - xi * xi
    d2 = -2.0 * xi
    values = np.array([0.5 * (1.0 - xi) - 0.5 * m2, m2, 0.5 * (1.0 + xi) - 0.5 * m2])
    derivs = np.array([-0.5 * (1.0 + d2), d2, 0.5 * (1.0 - d2)])
    return values, derivs


def grid_derivative_stencil(n_points: int, ds: float, index: int) -> np.ndarray:
    """Weights w_j such that du/ds at grid point ``index`` is sum_j w_j u_j.

    Interior points use the central quadratic stencil, end points the one-sided
    quadratic stencil; with only two points the linear slope is used.
    """
    if n_points < 2:
        raise ValueError("need at least two grid points")
    if not 0 <= index < n_points:
        raise IndexError(index)
    w = np.zeros(n_points)
    if n_points == 2:
        w[:] = (-1.0 / ds, 1.0 / ds)
        return w
    # quadratic pieces span 2*ds, so d(xi)/ds = 1/ds
    if index == 0:
        _, d = shape_quadratic(-1.0)
        w[0:3] = d / ds
    elif index == n_points - 1:
        _, d = shape_quadratic(1.0)
        w[-3:] = d / ds
    else:
        _, d = shape_quadratic(0.0)
        w[index - 1: index + 2] = d / ds
    return w


def derivative_matrix(n_points: int, ds: float | None = None) -> np.ndarray:
    ds = 1.0 / (n_points - 1) if ds is None else ds
    return np.array([grid_derivative_stencil(n_points, ds, i) for i in range(n_points)])


def _hat_weights(n: int, x: float, mode: str) -> np.ndarray:
    w = np.zeros(n)
    h = 1.0 / (n - 1)
    if mode == "constant":
        w[int(np.clip(np.floor(x / h + 0.5), 0, n - 1))] = 1.0
        return w
    c = min(int(np.floor(x / h)), n - 2)
    c = max(c, 0)
    f = x / h - c
    w[c] = 1.0 - f
    w[c + 1] = f
    return w


def sigma_interpolation(incl, s, mode: str = "linear") -> np.ndarray:
    """Weights of every grid point in the initial-stress value at local ``s``.

    General inclusions: ``linear`` gives trilinear hat functions, ``constant``
    the nearest grid point. Bars hold the stress constant on each subregion at
    its midpoint value, i.e. the mean of the two bounding grid points.
    """
    if isinstance(incl, LinearInclusion):
        n = incl.n_points
        s = float(np.atleast_1d(s)[0])
        c = min(max(int(np.floor(s * (n - 1))), 0), n - 2)
        w = np.zeros(n)
        w[c] = w[c + 1] = 0.5
        return w
    if mode not in ("linear", "constant"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    ws = [_hat_weights(n, float(x), mode) for n, x in zip(incl.grid, s)]
    # s fastest
    return np.einsum("k,j,i->kji", ws[2], ws[1], ws[0]).ravel()


def sigma_interpolation_matrix(incl: GeneralInclusion, S: np.ndarray, mode: str = "linear") -> np.ndarray:
    """Vectorised ``sigma_interpolation`` for local points S of shape (npts, 3)."""
    per_dir = []
    for d, n in enumerate(incl.grid):
        x = S[:, d]
        h = 1.0 / (n - 1)
        W = np.zeros((len(x), n))
        if mode == "constant":
            idx = np.clip(np.floor(x / h + 0.5), 0, n - 1).astype(int)
            W[np.arange(len(x)), idx] = 1.0
        else:
            c = np.clip(np.floor(x / h), 0, n - 2).astype(int)
            f = x / h - c
            W[np.arange(len(x)), c] = 1.0 - f
            W[np.arange(len(x)), c + 1] += f
        per_dir.append(W)
    return np.einsum("pk,pj,pi->pkji", per_dir[2], per_dir[1], per_dir[0]).reshape(len(S), -1)


def _strain_block(g: np.ndarray) -> np.ndarray:
    dx, dy, dz = g
    return np.array([
        [dx, 0.0, 0.0],
        [0.0, dy, 0.0],
        [0.0, 0.0, dz],
        [dy, dx, 0.0],
        [0.0, dz, dy],
        [dz, 0.0, dx],
    ])


def local_derivatives(incl: GeneralInclusion, k: int) -> np.ndarray:
    """dM_j/d(s,t,r) at grid point k for every grid point j, shape (3, M)."""
    ns, nt, nr = incl.grid
    i, rem = k % ns, k // ns
    j, l = rem % nt, rem // nt
    out = np.zeros((3, incl.n_points))
    Ds = grid_derivative_stencil(ns, 1.0 / (ns - 1), i)
    Dt = grid_derivative_stencil(nt, 1.0 / (nt - 1), j)
    Dr = grid_derivative_stencil(nr, 1.0 / (nr - 1), l)
    for a in range(ns):
        out[0, incl.grid_index(a, j, l)] = Ds[a]
    for b in range(nt):
        out[1, incl.grid_index(i, b, l)] = Dt[b]
    for c in range(nr):
        out[2, incl.grid_index(i, j, c)] = Dr[c]
    return out


def build_Bhat_general(incl: GeneralInclusion, k: int, jac: np.ndarray) -> np.ndarray:
    """6 x 3M matrix mapping grid displacements to the strain at grid point k."""
    dloc = local_derivatives(incl, k)
    try:
        glob = np.linalg.solve(jac, dloc)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular Jacobi matrix at grid point {k}") from exc
    B = np.zeros((6, 3 * incl.n_points))
    for j in np.nonzero(np.any(dloc != 0, axis=0))[0]:
        B[:, 3 * j: 3 * j + 3] = _strain_block(glob[:, j])
    return B


def build_Bhat_bar(incl: LinearInclusion, j: int, frame: LocalFrame | None = None) -> np.ndarray:
    """6 x 3J matrix whose third row gives the axial strain at grid point j."""
    frame = incl.frame() if frame is None else frame
    n = incl.n_points
    w = grid_derivative_stencil(n, 1.0 / (n - 1), j) / frame.J
    B = np.zeros((6, 3 * n))
    for m in np.nonzero(w)[0]:
        B[2, 3 * m: 3 * m + 3] = w[m] * frame.vz
    return B


def strain_recovery_matrix(incl) -> np.ndarray:
    """Stacked B-hat for all grid points of one inclusion, (6M, 3M)."""
    M = incl.n_points
    if isinstance(incl, LinearInclusion):
        frame = incl.frame()
        return np.vstack([build_Bhat_bar(incl, j, frame) for j in range(M)])
    loc = incl.local_grid()
    _, jac, _ = incl.map(loc[:, 0], loc[:, 1], loc[:, 2])
    return np.vstack([build_Bhat_general(incl, k, jac[k]) for k in range(M)])
