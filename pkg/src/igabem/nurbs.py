"""NURBS curves and surfaces: basis evaluation, refinement and Greville points.

All evaluation routines are vectorised over parameter arrays and return dense
basis matrices (one column per basis function). The patches used by the solver
carry at most a few dozen functions per direction, so dense storage is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DEGREE = 4


class NurbsError(ValueError):
    """Invalid NURBS data or out-of-range parameter."""


@dataclass(frozen=True)
class KnotVector:
    """Open (clamped) knot vector of a given degree."""

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).copy()
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        p = int(self.degree)
        object.__setattr__(self, "degree", p)
        if p < 0 or p > MAX_DEGREE:
            raise NurbsError(f"degree {p} outside 0..{MAX_DEGREE}")
        if knots.ndim != 1 or len(knots) < 2 * (p + 1):
            raise NurbsError(f"need at least {2 * (p + 1)} knots for degree {p}")
        if np.any(np.diff(knots) < 0):
            raise NurbsError("knots must be nondecreasing")
        if not (np.all(knots[: p + 1] == knots[0]) and np.all(knots[-p - 1:] == knots[-1])):
            raise NurbsError("knot vector must be open (end knots repeated degree+1 times)")
        if knots[-1] <= knots[0]:
            raise NurbsError("knot vector has zero length")
        inner = knots[p + 1: -p - 1]
        if len(inner):
            _, counts = np.unique(inner, return_counts=True)
            if counts.max() > max(p, 1):
                raise NurbsError("interior knot multiplicity exceeds degree")

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def breakpoints(self) -> np.ndarray:
        """Distinct knot values, i.e. element boundaries."""
        return np.unique(self.knots)

    def multiplicity(self, u: float) -> int:
        return int(np.sum(np.isclose(self.knots, u, rtol=0, atol=1e-14)))

    def reversed(self) -> "KnotVector":
        a, b = self.domain
        return KnotVector(a + b - self.knots[::-1], self.degree)

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and self.knots.shape == other.knots.shape
            and np.allclose(self.knots, other.knots, rtol=0, atol=1e-12)
        )

    def __hash__(self):
        return hash((self.degree, tuple(np.round(self.knots, 12))))


def _check_range(kv: KnotVector, u: np.ndarray) -> None:
    a, b = kv.domain
    tol = 1e-12 * (b - a)
    if np.any(u < a - tol) or np.any(u > b + tol):
        bad = u[(u < a - tol) | (u > b + tol)][0]
        raise NurbsError(f"parameter {bad!r} outside knot range [{a}, {b}]")


def _basis_table(kv: KnotVector, u, nders: int = 0) -> np.ndarray:
    """Derivatives 0..nders of all B-spline functions at the points ``u``.

    Returns an array of shape (nders + 1, len(u), n_basis).
    """
    t = kv.knots
    p = kv.degree
    u = np.atleast_1d(np.asarray(u, dtype=float))
    _check_range(kv, u)
    a, b = kv.domain
    u = np.clip(u, a, b)
    nspan = len(t) - 1
    last = max(i for i in range(nspan) if t[i] < t[i + 1])

    # table[q][d] holds the d-th derivative of the degree-q functions
    n0 = np.zeros((len(u), nspan))
    for i in range(nspan):
        if t[i] < t[i + 1]:
            n0[:, i] = (u >= t[i]) & (u < t[i + 1])
    at_end = u >= t[last + 1]
    n0[at_end, :] = 0.0
    n0[at_end, last] = 1.0

    prev = [n0] + [np.zeros_like(n0) for _ in range(nders)]
    for q in range(1, p + 1):
        m = nspan - q
        cur = [np.zeros((len(u), m)) for _ in range(nders + 1)]
        for i in range(m):
            d1 = t[i + q] - t[i]
            d2 = t[i + q + 1] - t[i + 1]
            c1 = (u - t[i]) / d1 if d1 > 0 else 0.0
            c2 = (t[i + q + 1] - u) / d2 if d2 > 0 else 0.0
            cur[0][:, i] = c1 * prev[0][:, i] + c2 * prev[0][:, i + 1]
            for d in range(1, nders + 1):
                g1 = q / d1 if d1 > 0 else 0.0
                g2 = q / d2 if d2 > 0 else 0.0
                cur[d][:, i] = g1 * prev[d - 1][:, i] - g2 * prev[d - 1][:, i + 1]
        prev = cur
    return np.stack(prev[: nders + 1])


def basis_values(kv: KnotVector, u) -> np.ndarray:
    """Values of every basis function at ``u`` (scalar or array).

    For scalar ``u`` a 1-D array of length ``n_basis`` is returned.
    """
    out = _basis_table(kv, u, 0)[0]
    return out[0] if np.ndim(u) == 0 else out


def basis_derivatives(kv: KnotVector, u, order: int = 1) -> np.ndarray:
    """Derivative of the given order of every basis function at ``u``."""
    if order < 1:
        raise NurbsError("derivative order must be >= 1")
    out = _basis_table(kv, u, order)[order]
    return out[0] if np.ndim(u) == 0 else out


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    p = kv.degree
    t = kv.knots
    if p == 0:
        return 0.5 * (t[:-1] + t[1:])
    return np.array([t[i + 1: i + p + 1].mean() for i in range(kv.n_basis)])


# ---------------------------------------------------------------------------
# curves and surfaces


@dataclass(frozen=True)
class NurbsCurve:
    kv: KnotVector
    control_points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        if cp.ndim != 2 or cp.shape[1] != 3:
            raise NurbsError("curve control points must have shape (n, 3)")
        if cp.shape[0] != self.kv.n_basis:
            raise NurbsError(
                f"{cp.shape[0]} control points but knot vector defines {self.kv.n_basis} functions"
            )
        w = np.ones(len(cp)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (len(cp),) or np.any(w <= 0):
            raise NurbsError("weights must be positive, one per control point")
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)

    @property
    def degree(self) -> int:
        return self.kv.degree

    def basis(self, u, nders: int = 1):
        """Rational basis and its first derivative at ``u`` (arrays)."""
        tab = _basis_table(self.kv, u, nders)
        w = self.weights
        nw = tab[0] * w
        W = nw.sum(axis=1, keepdims=True)
        R = nw / W
        if nders == 0:
            return R, None
        dnw = tab[1] * w
        dW = dnw.sum(axis=1, keepdims=True)
        dR = (dnw - R * dW) / W
        return R, dR

    def evaluate(self, u, derivative: bool = False):
        scalar = np.ndim(u) == 0
        R, dR = self.basis(u, 1)
        x = R @ self.control_points
        dx = dR @ self.control_points
        if scalar:
            x, dx = x[0], dx[0]
        return (x, dx) if derivative else x

    def _homogeneous(self) -> np.ndarray:
        return np.hstack([self.control_points * self.weights[:, None], self.weights[:, None]])

    @classmethod
    def _from_homogeneous(cls, kv: KnotVector, pw: np.ndarray) -> "NurbsCurve":
        w = pw[:, 3]
        return cls(kv, pw[:, :3] / w[:, None], w)


@dataclass(frozen=True)
class NurbsSurface:
    """Tensor-product NURBS surface; control net indexed [i (u), j (v)]."""

    kv_u: KnotVector
    kv_v: KnotVector
    control_points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        shape = (self.kv_u.n_basis, self.kv_v.n_basis)
        if cp.shape != shape + (3,):
            raise NurbsError(f"control net shape {cp.shape[:-1]} does not match knot vectors {shape}")
        w = np.ones(shape) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != shape or np.any(w <= 0):
            raise NurbsError("weights must be positive with the control-net shape")
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self) -> tuple[int, int]:
        return self.kv_u.n_basis, self.kv_v.n_basis

    @property
    def n_basis(self) -> int:
        return self.kv_u.n_basis * self.kv_v.n_basis

    @property
    def degrees(self) -> tuple[int, int]:
        return self.kv_u.degree, self.kv_v.degree

    def flat_control_points(self) -> np.ndarray:
        return self.control_points.reshape(-1, 3)

    def basis(self, u, v):
        """Rational basis R and derivatives dR/du, dR/dv, each (npts, n_basis)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        tu = _basis_table(self.kv_u, u, 1)
        tv = _basis_table(self.kv_v, v, 1)
        w = self.weights[None]
        n = tu[0][:, :, None] * tv[0][:, None, :] * w
        nu = tu[1][:, :, None] * tv[0][:, None, :] * w
        nv = tu[0][:, :, None] * tv[1][:, None, :] * w
        npts = len(u)
        n = n.reshape(npts, -1)
        nu = nu.reshape(npts, -1)
        nv = nv.reshape(npts, -1)
        W = n.sum(axis=1, keepdims=True)
        R = n / W
        Ru = (nu - R * nu.sum(axis=1, keepdims=True)) / W
        Rv = (nv - R * nv.sum(axis=1, keepdims=True)) / W
        return R, Ru, Rv

    def evaluate(self, u, v, derivatives: bool = False):
        """Surface point(s); with ``derivatives`` also the two tangent vectors."""
        scalar = np.ndim(u) == 0 and np.ndim(v) == 0
        R, Ru, Rv = self.basis(u, v)
        P = self.flat_control_points()
        x, xu, xv = R @ P, Ru @ P, Rv @ P
        if scalar:
            x, xu, xv = x[0], xu[0], xv[0]
        return (x, xu, xv) if derivatives else x

    def _homogeneous(self) -> np.ndarray:
        return np.concatenate([self.control_points * self.weights[..., None], self.weights[..., None]], axis=-1)

    @classmethod
    def _from_homogeneous(cls, kv_u, kv_v, pw) -> "NurbsSurface":
        w = pw[..., 3]
        return cls(kv_u, kv_v, pw[..., :3] / w[..., None], w)


def surface_point(srf: NurbsSurface, xi, eta, tangents: bool = False):
    return srf.evaluate(xi, eta, derivatives=tangents)


# ---------------------------------------------------------------------------
# refinement on homogeneous coordinates; ``pw`` has the refined axis first


def _insert_knot_1d(kv: KnotVector, pw: np.ndarray, u: float):
    p = kv.degree
    t = kv.knots
    a, b = kv.domain
    if not a < u < b:
        raise NurbsError(f"knot {u} must lie strictly inside ({a}, {b})")
    if kv.multiplicity(u) + 1 > max(p, 1):
        raise NurbsError(f"inserting {u} would exceed multiplicity {p}")
    k = int(np.searchsorted(t, u, side="right") - 1)
    n = len(pw)
    new = np.empty((n + 1,) + pw.shape[1:])
    new[: k - p + 1] = pw[: k - p + 1]
    new[k + 1:] = pw[k:]
    for i in range(k - p + 1, k + 1):
        alpha = (u - t[i]) / (t[i + p] - t[i])
        new[i] = alpha * pw[i] + (1.0 - alpha) * pw[i - 1]
    return KnotVector(np.insert(t, k + 1, u), p), new


def _elevate_1d(kv: KnotVector, pw: np.ndarray):
    # The homogeneous curve lies in the elevated spline space, so interpolating
    # it at the elevated Greville points recovers the exact new control points.
    p = kv.degree
    if p + 1 > MAX_DEGREE:
        raise NurbsError(f"cannot elevate beyond degree {MAX_DEGREE}")
    brk, counts = np.unique(kv.knots, return_counts=True)
    new_t = np.repeat(brk, counts + 1)
    new_kv = KnotVector(new_t, p + 1)
    g = greville_abscissae(new_kv)
    A = basis_values(new_kv, g)
    rhs = basis_values(kv, g) @ pw.reshape(len(pw), -1)
    sol = np.linalg.solve(A, rhs)
    return new_kv, sol.reshape((new_kv.n_basis,) + pw.shape[1:])


def insert_knot(obj, u: float, direction: int = 0):
    """Insert knot ``u`` once; ``direction`` selects u (0) or v (1) on surfaces."""
    if isinstance(obj, NurbsCurve):
        kv, pw = _insert_knot_1d(obj.kv, obj._homogeneous(), u)
        return NurbsCurve._from_homogeneous(kv, pw)
    pw = obj._homogeneous()
    if direction == 0:
        kv, pw = _insert_knot_1d(obj.kv_u, pw, u)
        return NurbsSurface._from_homogeneous(kv, obj.kv_v, pw)
    kv, pwt = _insert_knot_1d(obj.kv_v, np.swapaxes(pw, 0, 1), u)
    return NurbsSurface._from_homogeneous(obj.kv_u, kv, np.swapaxes(pwt, 0, 1))


def elevate_order(obj, direction: int = 0):
    """Raise the degree by one, preserving geometry."""
    if isinstance(obj, NurbsCurve):
        kv, pw = _elevate_1d(obj.kv, obj._homogeneous())
        return NurbsCurve._from_homogeneous(kv, pw)
    pw = obj._homogeneous()
    if direction == 0:
        kv, pw = _elevate_1d(obj.kv_u, pw)
        return NurbsSurface._from_homogeneous(kv, obj.kv_v, pw)
    kv, pwt = _elevate_1d(obj.kv_v, np.swapaxes(pw, 0, 1))
    return NurbsSurface._from_homogeneous(obj.kv_u, kv, np.swapaxes(pwt, 0, 1))


def refine_surface(srf: NurbsSurface, elevate=(0, 0), insert=((), ())) -> NurbsSurface:
    """Elevate each direction the given number of times, then insert knots."""
    for d in (0, 1):
        for _ in range(int(elevate[d])):
            srf = elevate_order(srf, d)
    for d in (0, 1):
        for u in insert[d]:
            srf = insert_knot(srf, float(u), d)
    return srf


def bilinear_patch(p00, p10, p01, p11) -> NurbsSurface:
    """Degree-1 patch through four corners; ``pij`` sits at (u=i, v=j)."""
    kv = KnotVector([0.0, 0.0, 1.0, 1.0], 1)
    cp = np.array([[p00, p01], [p10, p11]], dtype=float)
    return NurbsSurface(kv, kv, cp)


def line_curve(a, b) -> NurbsCurve:
    return NurbsCurve(KnotVector([0.0, 0.0, 1.0, 1.0], 1), np.array([a, b], dtype=float))
