"""Closed-form integrals of the strain kernel over cylindrical bar subregions.

The kernel is taken constant over the cross-section, so a subregion of length
H and radius R contributes pi R^2 times a line integral along its axis. Blocks
are computed in the bar-local frame (z' along the bar, the source in the
y'-z' plane at (0, y~, z~) relative to the subregion start) and act on local
Voigt stress vectors; ``bar_block`` premultiplies by the frame rotation.
"""

from __future__ import annotations

import numpy as np

from ..inclusions import BarSubregion, LinearInclusion, LocalFrame, bar_frame
from ..kernels import ElasticConstants

# below this fraction of H the source counts as lying on the axis
AXIS_TOL = 1e-8


def bar_integral_regular(ytilde: float, ztilde: float, H: float, R: float, mat: ElasticConstants) -> np.ndarray:
    """Local 3x6 block for a source off the subregion axis segment."""
    C, C3 = mat.C, mat.C3
    P = C * np.pi * R**2
    y, z = float(ytilde), float(ztilde)
    dz = H - z
    on_axis = abs(y) <= AXIS_TOL * H
    if on_axis:
        y = 0.0
        if -AXIS_TOL * H <= z <= H * (1 + AXIS_TOL):
            raise ValueError("source on the segment axis; use the singular integral")
    r1 = np.hypot(y, dz)
    r0 = np.hypot(y, z)
    M = np.zeros((3, 6))
    M[0, 5] = 2 * P * C3 * (1 / r1 - 1 / r0)
    M[1, 2] = -P * y * (dz / r1**3 + z / r0**3)
    M[1, 4] = 2 * P * ((y**2 + C3 * r1**2) / r1**3 - (y**2 + C3 * r0**2) / r0**3)
    M[2, 0] = P * (1 / r0 - 1 / r1)
    M[2, 1] = P * (z**2 / r0**3 - dz**2 / r1**3)
    M[2, 2] = P * (((1 + 2 * C3) * y**2 + 2 * (1 + C3) * dz**2) / r1**3
                   - ((1 + 2 * C3) * y**2 + 2 * (1 + C3) * z**2) / r0**3)
    if not on_axis:
        M[0, 3] = 2 * P * C3 / y * (dz / r1 + z / r0)
        M[1, 0] = -P / y * (dz / r1 + z / r0)
        M[1, 1] = P / y * ((2 * (1 + C3) * y**2 + (1 + 2 * C3) * dz**2) * dz / r1**3
                           + z / r0**3 * (2 * (1 + C3) * y**2 + (1 + 2 * C3) * z**2))
        M[2, 4] = 2 * P / y * ((C3 * r1**2 + dz**2) * dz / r1**3 + z / r0**3 * (z**2 + C3 * r0**2))
    return M


def bar_integral_singular(H: float, R: float, mat: ElasticConstants) -> np.ndarray:
    """Local 3x6 block of a cylinder of length H lying on the -z' side of a
    source on its end face centre.

    The result is the sum of the cone part (theta below arctan(R/H), bounded
    by the far end face) and the mantle part (bounded by the radius).
    """
    C, C3 = mat.C, mat.C3
    M = np.zeros((3, 6))
    if H <= 0:
        return M
    t = np.arctan(R / H)
    st, ct = np.sin(t), np.cos(t)
    v = C * np.pi / 2 * (H * (8 + 8 * C3 - (9 + 8 * C3) * ct + np.cos(3 * t))
                         - 4 * R * (-1 - 2 * C3 + 2 * C3 * st + st**3))
    M[0, 5] = M[1, 4] = v
    v = -C * np.pi * (R + st * (H / 2 * np.sin(2 * t) + R * (st**2 - 2)))
    M[2, 0] = M[2, 1] = v
    M[2, 2] = C * np.pi * (-2 * H * (ct - 1) * (2 * C3 + ct + ct**2)
                           + R * (2 + 4 * C3 - (3 + 4 * C3 + np.cos(2 * t)) * st))
    return M


def classify_source(sub: BarSubregion, vz: np.ndarray, source) -> tuple[str, float, float]:
    """Return (kind, y~, z~) for a source relative to one subregion.

    ``kind`` is ``"regular"`` or ``"singular"``. Sources within the bar radius
    whose axial foot lies on the segment are treated as on the axis.
    """
    d = np.asarray(source, dtype=float) - sub.start
    z = float(d @ vz)
    y = float(np.linalg.norm(d - z * vz))
    tol = AXIS_TOL * sub.H
    if y < sub.R and -tol <= z <= sub.H + tol:
        return "singular", y, z
    return "regular", y, z


def bar_block_local(sub: BarSubregion, vz, source, mat: ElasticConstants) -> np.ndarray:
    kind, y, z = classify_source(sub, vz, source)
    H, R = sub.H, sub.R
    if kind == "regular":
        return bar_integral_regular(y, z, H, R, mat)
    z = min(max(z, 0.0), H)
    # the part below the source (toward the start) and the part above it;
    # the part above is the mirror image and flips sign
    return bar_integral_singular(z, R, mat) - bar_integral_singular(H - z, R, mat)


def bar_block(incl: LinearInclusion, sub: BarSubregion, source, mat: ElasticConstants,
              frame: LocalFrame | None = None) -> np.ndarray:
    """Global-row 3x6 block acting on the local stress vector of ``sub``."""
    frame = bar_frame(incl, source) if frame is None else frame
    return frame.matrix @ bar_block_local(sub, incl.vz, source, mat)
