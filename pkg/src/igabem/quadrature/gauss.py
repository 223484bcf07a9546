"""Gauss-Legendre rules and small tensor-product helpers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ORDER = 64


@dataclass(frozen=True)
class GaussRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def on_interval(self, a: float, b: float):
        """Nodes and weights mapped to [a, b]."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> GaussRule:
    if not 1 <= int(n) <= MAX_ORDER:
        raise ValueError(f"Gauss order must lie in 1..{MAX_ORDER}, got {n}")
    x, w = np.polynomial.legendre.leggauss(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return GaussRule(x, w, int(n))


def unit_rule(n: int):
    """Gauss rule on [0, 1]."""
    return gauss_rule(n).on_interval(0.0, 1.0)


def box_rule_2d(lo, hi, n: int):
    """Tensor rule on the rectangle [lo, hi]; returns (u, v, w)."""
    xu, wu = gauss_rule(n).on_interval(lo[0], hi[0])
    xv, wv = gauss_rule(n).on_interval(lo[1], hi[1])
    U, V = np.meshgrid(xu, xv, indexing="ij")
    return U.ravel(), V.ravel(), np.outer(wu, wv).ravel()


def box_rule_3d(lo, hi, n: int):
    """Tensor rule on a box; returns points (npts, 3) and weights."""
    axes = [gauss_rule(n).on_interval(lo[d], hi[d]) for d in range(3)]
    X = np.stack(np.meshgrid(*(a[0] for a in axes), indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", *(a[1] for a in axes)).ravel()
    return X, W
