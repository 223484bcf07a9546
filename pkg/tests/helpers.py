from igabem.assembly import PatchBC
from igabem.inclusions import GeneralInclusion
from igabem.kernels import ElasticConstants
from igabem.nurbs import bilinear_patch

MAT = ElasticConstants(1.0, 0.2)


def box_inclusion(lo=(0, 0, 0), hi=(1, 1, 1), grid=(3, 3, 3), **kw):
    (a, b, c), (A, B, C) = lo, hi
    bottom = bilinear_patch([a, b, c], [A, b, c], [a, B, c], [A, B, c])
    top = bilinear_patch([a, b, C], [A, b, C], [a, B, C], [A, B, C])
    return GeneralInclusion(bottom, top, grid, MAT, **kw)


def sheared_inclusion():
    bottom = bilinear_patch([0, 0, 0], [2, 0, 0], [0, 1, 0.2], [2, 1, 0.1])
    top = bilinear_patch([0.3, 0, 1], [2.1, 0, 1.2], [0.2, 1, 1.1], [2.3, 1, 1.4])
    return GeneralInclusion(bottom, top, (3, 4, 2), MAT)


def uniaxial_bcs():
    """Bottom face fixed, unit vertical traction on top, other faces free."""
    return [PatchBC(("u", "u", "u"), (0.0, 0.0, 0.0)), PatchBC(("t", "t", "t"), (0.0, 0.0, 1.0))] + [PatchBC()] * 4
