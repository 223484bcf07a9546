"""Regenerate the shipped example model files."""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "igabem" / "models"


def bilinear(name, p00, p10, p01, p11, refine=None):
    spec = {
        "name": name,
        "degrees": [1, 1],
        "knots_u": [0.0, 0.0, 1.0, 1.0],
        "knots_v": [0.0, 0.0, 1.0, 1.0],
        "control_points": [[list(p00), list(p01)], [list(p10), list(p11)]],
    }
    if refine is not None:
        spec["refine"] = refine
    return spec


def box_patches(lo, hi, long_refine=None, end_refine=None):
    """Six outward-oriented faces. With ``long_refine`` the four faces running
    along x get their x-parameter direction refined by it."""
    (x0, y0, z0), (x1, y1, z1) = lo, hi

    def c(i, j, k):
        return ((x0, x1)[i], (y0, y1)[j], (z0, z1)[k])

    def lr(dir_x):
        if long_refine is None:
            return None
        ins = list(long_refine)
        return {"elevate": [1, 1], "insert_u": ins if dir_x == 0 else [], "insert_v": ins if dir_x == 1 else []}

    return [
        bilinear("bottom", c(0, 0, 0), c(0, 1, 0), c(1, 0, 0), c(1, 1, 0), lr(1)),
        bilinear("top", c(0, 0, 1), c(1, 0, 1), c(0, 1, 1), c(1, 1, 1), lr(0)),
        bilinear("front", c(0, 0, 0), c(1, 0, 0), c(0, 0, 1), c(1, 0, 1), lr(0)),
        bilinear("back", c(0, 1, 0), c(0, 1, 1), c(1, 1, 0), c(1, 1, 1), lr(1)),
        bilinear("left", c(0, 0, 0), c(0, 0, 1), c(0, 1, 0), c(0, 1, 1), end_refine),
        bilinear("right", c(1, 0, 0), c(1, 1, 0), c(1, 0, 1), c(1, 1, 1), end_refine),
    ]


def example1():
    return {
        "schema_version": 1,
        "name": "example1",
        "description": "Unit cube under uniaxial tension with a stiff vertical bar through its centre. "
                       "Interpreted: bar spans bottom to top on the cube axis; knot 0.5 inserted in both "
                       "directions of every patch after elevation to quadratic.",
        "material": {"E": 1.0, "nu": 0.0},
        "patches": box_patches((0, 0, 0), (1, 1, 1)),
        "refine": {"elevate": [1, 1], "insert_u": [0.5], "insert_v": [0.5]},
        "bc": [
            {"patch": "bottom", "kind": ["u", "u", "u"], "value": [0.0, 0.0, 0.0]},
            {"patch": "top", "kind": ["t", "t", "t"], "value": [0.0, 0.0, 1.0]},
        ],
        "inclusions": [
            {"type": "linear", "name": "bar", "start": [0.5, 0.5, 0.0], "end": [0.5, 0.5, 1.0],
             "radius": 0.05, "points": 2, "E": 2.0, "nu": 0.0},
        ],
        "solver": {"method": "onestep", "tol": 1e-10, "max_iter": 200, "sigma_interpolation": "linear"},
        "output": {
            "probes": [{"id": "top", "x": [0.5, 0.5, 1.0]}, {"id": "corner", "x": [1.0, 1.0, 1.0]}],
            "sweep": {"parameter": "internal_points", "values": list(range(2, 22)), "inclusion": "bar"},
        },
    }


def example2():
    knots = [0.2, 0.4, 0.6, 0.8]
    lo, hi = (0.0, 0.0, 0.0), (4.0, 1.0, 1.0)
    incl_bottom = bilinear("inclusion_bottom", (2, 0, 0), (4, 0, 0), (2, 1, 0), (4, 1, 0))
    incl_top = bilinear("inclusion_top", (2, 0, 1), (4, 0, 1), (2, 1, 1), (4, 1, 1))
    return {
        "schema_version": 1,
        "name": "example2",
        "description": "Two-material cantilever, fixed at x=0 and loaded by a distributed vertical "
                       "traction on x=4. Interpreted: beam 4x1x1, softer half x in [2,4] over the full "
                       "section, uniform knots inserted along the beam.",
        "material": {"E": 1000.0, "nu": 0.0},
        "patches": box_patches(lo, hi, long_refine=knots, end_refine={"elevate": [1, 1]}),
        "surfaces": [incl_bottom, incl_top],
        "bc": [
            {"patch": "left", "kind": ["u", "u", "u"], "value": [0.0, 0.0, 0.0]},
            {"patch": "right", "kind": ["t", "t", "t"], "value": [0.0, 0.0, -1.0]},
        ],
        "inclusions": [
            {"type": "general", "name": "soft", "bottom": "inclusion_bottom", "top": "inclusion_top",
             "grid": [3, 2, 2], "E": 500.0, "nu": 0.0},
        ],
        "solver": {"method": "onestep", "tol": 1e-10, "max_iter": 500, "sigma_interpolation": "linear"},
        "output": {
            "probes": [{"id": "tip", "x": [4.0, 0.5, 1.0]}, {"id": "mid", "x": [2.0, 0.5, 1.0]}],
        },
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for fn in (example1, example2):
        m = fn()
        (OUT / f"{m['name']}.json").write_text(json.dumps(m, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
