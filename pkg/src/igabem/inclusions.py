"""Geometry of elastic inclusions: volume inclusions bounded by two NURBS
surfaces, and straight bars (reinforcement bars, rock bolts).

Grid points of every inclusion are ordered lexicographically with the first
local coordinate running fastest. Every assembled matrix inherits that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .kernels import ElasticConstants
from .nurbs import NurbsCurve, NurbsSurface


class DegenerateMappingError(ValueError):
    pass


@dataclass(frozen=True)
class LocalFrame:
    vx: np.ndarray
    vy: np.ndarray
    vz: np.ndarray
    J: float

    @property
    def matrix(self) -> np.ndarray:
        return transformation_matrix(self)


def transformation_matrix(frame: LocalFrame) -> np.ndarray:
    """Rotation whose columns are the local axes in global coordinates."""
    return np.column_stack([frame.vx, frame.vy, frame.vz])


@dataclass(frozen=True)
class Cell:
    """Box [corner, corner + size] in local inclusion coordinates."""

    corner: np.ndarray
    size: np.ndarray
    index: tuple

    @property
    def jacobian(self) -> float:
        # affine map from [-1, 1]^3
        return float(np.prod(self.size)) / 8.0

    def contains(self, s, tol: float = 1e-10) -> bool:
        s = np.asarray(s)
        return bool(np.all(s >= self.corner - tol) and np.all(s <= self.corner + self.size + tol))


class GeneralInclusion:
    """Volume between a bottom surface (r = 0) and a top surface (r = 1)."""

    kind = "general"

    def __init__(self, bottom: NurbsSurface, top: NurbsSurface, grid, material: ElasticConstants,
                 subdivisions=(1, 1, 1), name: str = ""):
        grid = tuple(int(n) for n in grid)
        if len(grid) != 3 or min(grid) < 2:
            raise ValueError(f"grid dimensions must be three integers >= 2, got {grid}")
        self.bottom = bottom
        self.top = top
        self.grid = grid
        self.material = material
        self.subdivisions = tuple(int(n) for n in subdivisions)
        self.name = name
        for srf in (bottom, top):
            for kv in (srf.kv_u, srf.kv_v):
                if kv.domain != (0.0, 1.0):
                    raise ValueError("bounding surfaces must be parametrised over [0, 1]^2")

    @property
    def n_points(self) -> int:
        return int(np.prod(self.grid))

    def map(self, s, t, r):
        """Global point, Jacobi matrix (rows d/ds, d/dt, d/dr) and Jacobian."""
        s, t, r = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (s, t, r))
        if np.any((s < -1e-12) | (s > 1 + 1e-12) | (t < -1e-12) | (t > 1 + 1e-12)
                  | (r < -1e-12) | (r > 1 + 1e-12)):
            raise ValueError("local coordinates must lie in [0, 1]^3")
        x1, x1s, x1t = self.bottom.evaluate(s, t, derivatives=True)
        x2, x2s, x2t = self.top.evaluate(s, t, derivatives=True)
        rr = r[:, None]
        x = (1 - rr) * x1 + rr * x2
        jac = np.stack([(1 - rr) * x1s + rr * x2s, (1 - rr) * x1t + rr * x2t, x2 - x1], axis=1)
        det = np.linalg.det(jac)
        if np.any(det <= 0):
            k = int(np.argmin(det))
            raise DegenerateMappingError(
                f"inclusion mapping degenerate at (s,t,r)=({s[k]:.4g},{t[k]:.4g},{r[k]:.4g}), det={det[k]:.3g}"
            )
        return x, jac, det

    def map_point(self, s):
        x, jac, det = self.map(*np.asarray(s, dtype=float).reshape(3, 1))
        return x[0], jac[0], det[0]

    def local_grid(self) -> np.ndarray:
        axes = [np.linspace(0.0, 1.0, n) for n in self.grid]
        # s fastest, then t, then r
        return np.array([(a, b, c) for c, b, a in product(axes[2], axes[1], axes[0])])

    def grid_points(self):
        loc = self.local_grid()
        x, _, _ = self.map(loc[:, 0], loc[:, 1], loc[:, 2])
        return loc, x

    def grid_index(self, i, j, k) -> int:
        ns, nt, _ = self.grid
        return i + ns * (j + nt * k)

    def cells(self):
        """Integration regions: grid cells, each optionally subdivided."""
        out = []
        for k, j, i in product(*(range(n - 1) for n in self.grid[::-1])):
            size = np.array([1.0 / (n - 1) for n in self.grid])
            corner = np.array([i, j, k], dtype=float) * size
            sub = np.array(self.subdivisions)
            h = size / sub
            for c, b, a in product(*(range(m) for m in sub[::-1])):
                out.append(Cell(corner + np.array([a, b, c]) * h, h, (i, j, k)))
        return out

    def inverse_map(self, x, tol: float = 1e-12, max_iter: int = 50):
        """Local coordinates of global point ``x`` or None if it lies outside."""
        x = np.asarray(x, dtype=float)
        g = np.linspace(0, 1, 5)
        S = np.array(list(product(g, g, g)))
        pts, _, _ = self.map(S[:, 0], S[:, 1], S[:, 2])
        s = S[np.argmin(np.linalg.norm(pts - x, axis=1))].copy()
        scale = np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))
        for _ in range(max_iter):
            xs, jac, _ = self.map_point(np.clip(s, 0, 1))
            res = xs - x
            if np.linalg.norm(res) <= tol * scale:
                break
            step = np.linalg.solve(jac.T, res)
            s = s - step
            if np.any(s < -0.5) or np.any(s > 1.5):
                return None
        s_clip = np.clip(s, 0, 1)
        xs, _, _ = self.map_point(s_clip)
        if np.linalg.norm(xs - x) > 1e-9 * scale:
            return None
        return s_clip

    def bounding_box(self):
        g = np.linspace(0, 1, 5)
        S = np.array(list(product(g, g, g)))
        pts, _, _ = self.map(S[:, 0], S[:, 1], S[:, 2])
        return pts.min(axis=0), pts.max(axis=0)


@dataclass(frozen=True)
class BarSubregion:
    s0: float
    s1: float
    start: np.ndarray
    end: np.ndarray
    H: float
    R: float

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.start + self.end)

    @property
    def volume(self) -> float:
        return np.pi * self.R**2 * self.H


class LinearInclusion:
    """Straight bar with circular cross-section along a degree-1 NURBS curve."""

    kind = "linear"

    def __init__(self, axis: NurbsCurve, radius: float, n_points: int, material: ElasticConstants,
                 name: str = ""):
        if axis.degree != 1:
            raise ValueError("bar axis must be a degree-1 curve")
        if len(axis.control_points) != 2:
            raise ValueError("bar axis must be a single straight segment (two control points)")
        if not radius > 0:
            raise ValueError(f"bar radius must be positive, got {radius}")
        if int(n_points) < 2:
            raise ValueError("a bar needs at least 2 grid points")
        if not np.allclose(axis.weights, axis.weights[0]):
            raise ValueError("bar axis weights must be uniform")
        self.axis = axis
        self.radius = float(radius)
        self.n_points_ = int(n_points)
        self.material = material
        self.name = name
        a, b = axis.control_points
        self.start = a.copy()
        self.end = b.copy()
        V = b - a
        self.J = float(np.linalg.norm(V))
        if self.J == 0:
            raise ValueError("bar axis has zero length")
        self.vz = V / self.J

    @property
    def n_points(self) -> int:
        return self.n_points_

    @property
    def length(self) -> float:
        return self.J

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return self.start + s[..., None] * (self.end - self.start)

    def local_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    def grid_points(self):
        s = self.local_grid()
        return s, self.point(s)

    def subregions(self) -> list[BarSubregion]:
        s = self.local_grid()
        H = self.J / (self.n_points - 1)
        return [BarSubregion(s[i], s[i + 1], self.point(s[i]), self.point(s[i + 1]), H, self.radius)
                for i in range(self.n_points - 1)]

    def frame(self, source=None) -> LocalFrame:
        return bar_frame(self, source)

    def axial_coordinates(self, source):
        """Distance of ``source`` from the axis and its axial coordinate from the start."""
        d = np.asarray(source, dtype=float) - self.start
        z = float(d @ self.vz)
        rho = float(np.linalg.norm(d - z * self.vz))
        return rho, z


def bar_frame(incl: LinearInclusion, source=None, on_axis_tol: float = 1e-10) -> LocalFrame:
    """Local axes with z' along the bar and the source in the y'-z' plane."""
    vz = incl.vz
    V = None
    if source is not None:
        V = np.cross(np.asarray(source, dtype=float) - incl.start, vz)
        if np.linalg.norm(V) <= on_axis_tol * incl.J:
            V = None
    if V is None:
        V = np.cross(np.array([0.0, 1.0, 0.0]), vz)
        if np.linalg.norm(V) < 1e-8:
            # bar parallel to global y
            V = np.cross(np.array([0.0, 0.0, 1.0]), vz)
    vx = V / np.linalg.norm(V)
    vy = np.cross(vz, vx)
    return LocalFrame(vx, vy, vz.copy(), incl.J)
