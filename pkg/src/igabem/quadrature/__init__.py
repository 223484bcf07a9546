from .gauss import GaussRule, gauss_rule
from .options import QuadratureOptions
from .surface import PatchIntegrator
from .volume import integrate_volume, integrate_volume_regular, integrate_volume_singular
from .bar import bar_block, bar_integral_regular, bar_integral_singular

__all__ = [
    "GaussRule",
    "gauss_rule",
    "QuadratureOptions",
    "PatchIntegrator",
    "integrate_volume",
    "integrate_volume_regular",
    "integrate_volume_singular",
    "bar_block",
    "bar_integral_regular",
    "bar_integral_singular",
]
