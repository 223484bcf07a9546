"""Fundamental solutions of 3-D isotropic elastostatics and Voigt helpers.

Voigt ordering is (11, 22, 33, 12, 23, 13) throughout. Strain vectors use
engineering shear components; stress vectors use tensor components.

All kernels take a single source point and an array of field points of shape
(..., 3) and broadcast over the leading axes. The distance vector is always
``r = field - source``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))


class SingularityError(ValueError):
    """Kernel evaluated at coincident source and field points."""


@dataclass(frozen=True)
class ElasticConstants:
    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"Poisson's ratio must lie in (-1, 0.5), got {self.nu}")

    @property
    def G(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def C(self) -> float:
        return 1.0 / (16.0 * np.pi * self.G * (1.0 - self.nu))

    @property
    def C3(self) -> float:
        return 1.0 - 2.0 * self.nu

    C4 = 3.0


def _distance(source, field):
    r = np.asarray(field, dtype=float) - np.asarray(source, dtype=float)
    dist = np.linalg.norm(r, axis=-1)
    if np.any(dist == 0.0):
        raise SingularityError("source and field points coincide")
    return dist, r / dist[..., None]


def kelvin_U(source, field, mat: ElasticConstants) -> np.ndarray:
    """Displacement kernel U_ij (response in j to a unit force in i)."""
    dist, d = _distance(source, field)
    c = 1.0 / (16.0 * np.pi * mat.G * (1.0 - mat.nu) * dist)
    out = d[..., :, None] * d[..., None, :]
    out += (3.0 - 4.0 * mat.nu) * np.eye(3)
    return out * c[..., None, None]


def kelvin_T(source, field, normal, mat: ElasticConstants) -> np.ndarray:
    """Traction kernel T_ij for the unit outward normal at the field point."""
    dist, d = _distance(source, field)
    n = np.broadcast_to(np.asarray(normal, dtype=float), d.shape)
    c3 = 1.0 - 2.0 * mat.nu
    drdn = np.einsum("...k,...k->...", d, n)
    dd = d[..., :, None] * d[..., None, :]
    out = drdn[..., None, None] * (c3 * np.eye(3) + 3.0 * dd)
    out -= c3 * (d[..., :, None] * n[..., None, :] - n[..., :, None] * d[..., None, :])
    return out * (-1.0 / (8.0 * np.pi * (1.0 - mat.nu) * dist**2))[..., None, None]


def _E_bracket(d, mat: ElasticConstants) -> np.ndarray:
    # C3 (r,k d_ij + r,j d_ik) - r,i d_jk + C4 r,i r,j r,k  for unit direction d
    eye = np.eye(3)
    c3 = mat.C3
    t = c3 * np.einsum("ij,...k->...ijk", eye, d)
    t = t + c3 * np.einsum("ik,...j->...ijk", eye, d)
    t = t - np.einsum("jk,...i->...ijk", eye, d)
    # d_i (d_j d_k) keeps the result bitwise symmetric in j, k
    djk = d[..., :, None] * d[..., None, :]
    t = t + mat.C4 * (d[..., :, None, None] * djk[..., None, :, :])
    return t


def kernel_E_tensor(source, field, mat: ElasticConstants) -> np.ndarray:
    """Strain kernel E_ijk, symmetric in (j, k), shape (..., 3, 3, 3)."""
    dist, d = _distance(source, field)
    return _E_bracket(d, mat) * (-mat.C / dist**2)[..., None, None, None]


def tensor_to_voigt_kernel(Eijk: np.ndarray) -> np.ndarray:
    """Convert E_ijk to the 3x6 matrix acting on Voigt stress vectors."""
    cols = []
    for j, k in VOIGT_PAIRS:
        if j == k:
            cols.append(Eijk[..., :, j, k])
        else:
            cols.append(Eijk[..., :, j, k] + Eijk[..., :, k, j])
    return np.stack(cols, axis=-1)


def kernel_E(source, field, mat: ElasticConstants) -> np.ndarray:
    """Voigt form of the strain kernel, shape (..., 3, 6)."""
    return tensor_to_voigt_kernel(kernel_E_tensor(source, field, mat))


def kernel_E_tilde_local(source, field, frame, mat: ElasticConstants) -> np.ndarray:
    """Bar-local Voigt kernel without the 1/r^2 factor.

    ``field`` lies on the bar axis; ``frame`` is a :class:`LocalFrame` whose
    x' axis is perpendicular to the plane through the axis and the source.
    """
    T = frame.matrix
    r = np.asarray(field, dtype=float) - np.asarray(source, dtype=float)
    local = r @ T
    dist = np.linalg.norm(local, axis=-1)
    if np.any(dist == 0.0):
        raise SingularityError("source and field points coincide")
    d = local / dist[..., None]
    return tensor_to_voigt_kernel(-mat.C * _E_bracket(d, mat))


def voigt_stress(sigma: np.ndarray) -> np.ndarray:
    s = np.asarray(sigma)
    return np.array([s[i, j] for i, j in VOIGT_PAIRS])


def voigt_strain(eps: np.ndarray) -> np.ndarray:
    e = np.asarray(eps)
    return np.array([e[i, j] if i == j else 2.0 * e[i, j] for i, j in VOIGT_PAIRS])


def elasticity_matrix(mat: ElasticConstants) -> np.ndarray:
    """Isotropic 6x6 elasticity matrix for engineering shear strains."""
    E, nu = mat.E, mat.nu
    if 0.5 - nu < 1e-8:
        raise ValueError("Poisson's ratio too close to 0.5; elasticity matrix ill-conditioned")
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    G = mat.G
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] = lam + 2.0 * G
    D[np.arange(3, 6), np.arange(3, 6)] = G
    return D


def bar_D_difference(E_domain: float, E_incl: float) -> np.ndarray:
    """Local (D' - D'_incl) for a bar: only the axial entry survives."""
    if E_domain <= 0 or E_incl <= 0:
        raise ValueError("Young's moduli must be positive")
    out = np.zeros((6, 6))
    out[2, 2] = E_domain - E_incl
    return out
