"""Brute-force reference computations.

These share no formula code with the modules they check: the strain kernel is
re-derived component by component, bar integrals are computed by adaptive
quadrature of the defining integrals, and the singular bar integral by polar
Gauss quadrature over the cylinder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad_vec

from .kernels import ElasticConstants, kelvin_U

VOIGT = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))


@dataclass
class OracleReport:
    check: str
    measured: float
    reference: float
    error: float
    tol: float
    passed: bool
    residual: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.check:<22} error={self.error:.3e}  tol={self.tol:.1e}  "
                f"self-residual={self.residual:.1e}")


@dataclass(frozen=True)
class PerturbedConstants(ElasticConstants):
    """Material whose kernel constant C is scaled; a negative control for checks."""

    scale: float = 1.0

    @property
    def C(self) -> float:
        return ElasticConstants.C.fget(self) * self.scale


def strain_kernel_reference(rvec, mat: ElasticConstants) -> np.ndarray:
    """3x6 Voigt strain kernel for r = field - source, written out directly."""
    r = float(np.sqrt(rvec[0] ** 2 + rvec[1] ** 2 + rvec[2] ** 2))
    d = [rvec[0] / r, rvec[1] / r, rvec[2] / r]
    nu = mat.nu
    G = mat.E / (2 * (1 + nu))
    c = 1.0 / (16 * np.pi * G * (1 - nu))
    c3 = 1 - 2 * nu
    out = np.zeros((3, 6))

    def e(i, j, k):
        dij = 1.0 if i == j else 0.0
        dik = 1.0 if i == k else 0.0
        djk = 1.0 if j == k else 0.0
        return -c / r**2 * (c3 * (d[k] * dij + d[j] * dik) - d[i] * djk + 3.0 * d[i] * d[j] * d[k])

    for i in range(3):
        for col, (j, k) in enumerate(VOIGT):
            out[i, col] = e(i, j, k) if j == k else e(i, j, k) + e(i, k, j)
    return out


def bar_regular_reference(ytilde: float, ztilde: float, H: float, R: float, mat: ElasticConstants,
                          epsrel: float = 1e-12):
    """pi R^2 times the line integral of the kernel along the subregion axis.

    Returns (value, residual): the residual is the change when the tolerance
    is tightened a hundredfold.
    """
    def f(z):
        return strain_kernel_reference(np.array([0.0, -ytilde, z - ztilde]), mat)

    kw = dict(epsabs=0.0, limit=400)
    # split at the foot of the source so the peak is resolved
    pts = [0.0, H]
    if 0.0 < ztilde < H:
        pts = [0.0, ztilde, H]

    def run(rel):
        tot = np.zeros((3, 6))
        for a, b in zip(pts[:-1], pts[1:]):
            v, _ = quad_vec(f, a, b, epsrel=rel, **kw)
            tot += v
        return np.pi * R**2 * tot

    coarse = run(epsrel * 100)
    fine = run(epsrel)
    scale = max(np.abs(fine).max(), np.finfo(float).tiny)
    return fine, float(np.abs(fine - coarse).max() / scale)


def bar_singular_reference(H: float, R: float, mat: ElasticConstants, n: int = 48):
    """Integral over a cylinder of length H on the -z' side of a source at the
    centre of its end face, in polar coordinates about the source.

    The kernel times r^2 depends only on direction, so the radial integral is
    the distance to the cylinder surface. Returns (value, residual) with the
    residual from halving the Gauss order.
    """
    def run(m):
        x, w = leggauss(m)
        theta_t = np.arctan(R / H)
        acc = np.zeros((3, 6))
        phis = np.pi * (x + 1.0)
        wphi = np.pi * w
        for th0, th1, reach in ((0.0, theta_t, lambda t: H / np.cos(t)),
                                (theta_t, np.pi / 2, lambda t: R / np.sin(t))):
            ths = th0 + (th1 - th0) * (x + 1.0) / 2
            wth = w * (th1 - th0) / 2
            for th, wt in zip(ths, wth):
                for ph, wp in zip(phis, wphi):
                    d = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), -np.cos(th)])
                    acc += strain_kernel_reference(d, mat) * reach(th) * np.sin(th) * wt * wp
        return acc

    fine = run(n)
    coarse = run(n // 2)
    scale = max(np.abs(fine).max(), np.finfo(float).tiny)
    return fine, float(np.abs(fine - coarse).max() / scale)


def fd_kernel_strain(source, field_pt, mat: ElasticConstants, h_rel: float = 1e-6) -> np.ndarray:
    """Voigt strain kernel from central differences of U in the field point."""
    source = np.asarray(source, dtype=float)
    y = np.asarray(field_pt, dtype=float)
    h = h_rel * np.linalg.norm(y - source)
    grad = np.zeros((3, 3, 3))  # i, j, k: d U_ij / d y_k
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad[:, :, k] = (kelvin_U(source, y + e, mat) - kelvin_U(source, y - e, mat)) / (2 * h)
    sym = 0.5 * (grad + grad.transpose(0, 2, 1))
    out = np.zeros((3, 6))
    for col, (j, k) in enumerate(VOIGT):
        out[:, col] = sym[:, j, k] if j == k else sym[:, j, k] + sym[:, k, j]
    return out


def fd_jacobian(fn, s, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a map R^3 -> R^3, rows d/ds_a."""
    s = np.asarray(s, dtype=float)
    out = np.zeros((3, 3))
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        out[a] = (fn(s + e) - fn(s - e)) / (2 * h)
    return out


def mixtures_estimate(E: float, E_incl: float, R: float, length: float = 1.0, traction: float = 1.0,
                      area: float = 1.0) -> float:
    """Top displacement of a prism with one through-bar under axial traction,
    treating bar and matrix as parallel springs."""
    return traction * length / (E + (E_incl - E) * np.pi * R**2 / area)


def unit_cube_patches(elevate=(1, 1), insert=((0.5,), (0.5,))):
    """Outward-oriented faces of [0,1]^3: bottom, top, front, back, left, right."""
    from .nurbs import bilinear_patch, refine_surface

    def c(i, j, k):
        return np.array([i, j, k], dtype=float)

    faces = [
        bilinear_patch(c(0, 0, 0), c(0, 1, 0), c(1, 0, 0), c(1, 1, 0)),
        bilinear_patch(c(0, 0, 1), c(1, 0, 1), c(0, 1, 1), c(1, 1, 1)),
        bilinear_patch(c(0, 0, 0), c(1, 0, 0), c(0, 0, 1), c(1, 0, 1)),
        bilinear_patch(c(0, 1, 0), c(0, 1, 1), c(1, 1, 0), c(1, 1, 1)),
        bilinear_patch(c(0, 0, 0), c(0, 0, 1), c(0, 1, 0), c(0, 1, 1)),
        bilinear_patch(c(1, 0, 0), c(1, 1, 0), c(1, 0, 1), c(1, 1, 1)),
    ]
    return [refine_surface(f, elevate, insert) for f in faces]


def closed_box_T(sources, mat: ElasticConstants, opts=None) -> np.ndarray:
    """Max componentwise deviation of the summed T integral from -I per source."""
    from .quadrature import PatchIntegrator

    integs = [PatchIntegrator(p, opts) for p in unit_cube_patches((0, 0), ((), ()))]
    errs = []
    for s in np.atleast_2d(sources):
        tot = sum(ig.integrate_T_total(s, mat) for ig in integs)
        errs.append(np.abs(tot + np.eye(3)).max())
    return np.array(errs)


def patch_test():
    """Uniaxial cube (E=1, nu=0, bottom fixed, unit traction on top).
    Returns displacements at a few boundary and interior points."""
    from .assembly import PatchBC, Problem, assemble_boundary, displacement_at

    bcs = [PatchBC(("u", "u", "u"), (0.0, 0.0, 0.0)), PatchBC(("t", "t", "t"), (0.0, 0.0, 1.0))]
    bcs += [PatchBC()] * 4
    pr = Problem(ElasticConstants(1.0, 0.0), unit_cube_patches(), bcs)
    op = assemble_boundary(pr)
    x = np.linalg.solve(op.L, op.r)
    pts = np.array([[0.5, 0.5, 1.0], [0.2, 0.7, 1.0], [1.0, 0.3, 0.4], [0.4, 0.6, 0.5]])
    return pts, displacement_at(pts, x, pr, op)


def run_verify(kernel_scale: float = 1.0, seed: int = 20240611) -> list[OracleReport]:
    """All field checks. ``kernel_scale`` != 1 perturbs the kernel constant used
    by the closed-form bar integrals (negative control)."""
    from .quadrature.bar import bar_integral_regular, bar_integral_singular
    from .quadrature.volume import integrate_volume
    from .inclusions import GeneralInclusion
    from .kernels import kernel_E
    from .nurbs import bilinear_patch
    from .quadrature.options import QuadratureOptions

    rng = np.random.default_rng(seed)
    reports = []
    mat = ElasticConstants(1.0, 0.3)
    pmat = PerturbedConstants(1.0, 0.3, kernel_scale)

    src = rng.uniform(0.1, 0.9, size=(5, 3))
    errs = closed_box_T(src, mat)
    reports.append(OracleReport("closed_box_T", float(errs.max()), 0.0, float(errs.max()), 1e-4,
                                bool(errs.max() < 1e-4)))

    worst, resid = 0.0, 0.0
    for _ in range(20):
        H = rng.uniform(0.05, 1.0)
        y = rng.uniform(0.05, 1.0)
        z = rng.uniform(-1.0, 2.0)
        ref, res = bar_regular_reference(y, z, H, 0.05, mat)
        got = bar_integral_regular(y, z, H, 0.05, pmat)
        worst = max(worst, float(np.abs(got - ref).max() / np.abs(ref).max()))
        resid = max(resid, res)
    reports.append(OracleReport("bar_regular", worst, 0.0, worst, 1e-8, worst < 1e-8, resid))

    worst, resid = 0.0, 0.0
    for H, R in ((1.0, 0.05), (0.3, 0.1), (0.5, 0.5)):
        ref, res = bar_singular_reference(H, R, mat)
        got = bar_integral_singular(H, R, pmat)
        worst = max(worst, float(np.abs(got - ref).max() / np.abs(ref).max()))
        resid = max(resid, res)
    reports.append(OracleReport("bar_singular", worst, 0.0, worst, 1e-6, worst < 1e-6, resid))

    worst = 0.0
    for _ in range(20):
        a = rng.normal(size=3)
        b = a + rng.normal(size=3)
        an = kernel_E(a, b, mat)
        fd = fd_kernel_strain(a, b, mat)
        worst = max(worst, float(np.abs(an - fd).max() / np.abs(an).max()))
    reports.append(OracleReport("kernel_fd", worst, 0.0, worst, 1e-5, worst < 1e-5))

    c = lambda *p: np.array(p, dtype=float)  # noqa: E731
    inc = GeneralInclusion(bilinear_patch(c(0, 0, 0), c(1, 0, 0), c(0, 1, 0), c(1, 1, 0)),
                           bilinear_patch(c(0, 0, 1), c(1, 0, 1), c(0, 1, 1), c(1, 1, 1)), (2, 2, 2), mat)
    v8 = integrate_volume(inc, c(0, 0, 0), mat, np.zeros(3), QuadratureOptions(volume_singular_order=8)).sum(0)
    v16 = integrate_volume(inc, c(0, 0, 0), mat, np.zeros(3), QuadratureOptions(volume_singular_order=16)).sum(0)
    mask = np.abs(v16) > 1e-12 * np.abs(v16).max()
    rel = float(np.max(np.abs(v8 - v16)[mask] / np.abs(v16)[mask]))
    reports.append(OracleReport("volume_singular", rel, 0.0, rel, 1e-3, rel < 1e-3))

    pts, u = patch_test()
    err = float(np.abs(u - np.column_stack([np.zeros((len(pts), 2)), pts[:, 2]])).max())
    reports.append(OracleReport("patch_test", float(u[0, 2]), 1.0, err, 1e-3, err < 1e-3))
    return reports
