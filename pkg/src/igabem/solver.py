"""Solution procedures for the initial-stress coupled system."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import Problem, SystemMatrices
from .inclusions import LinearInclusion
from .kernels import elasticity_matrix

log = logging.getLogger(__name__)

METHODS = ("onestep", "coupled", "newton")


class SolveError(RuntimeError):
    pass


class ConvergenceError(SolveError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass(frozen=True)
class SolveOptions:
    method: str = "onestep"
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class SolveResult:
    method: str
    x: np.ndarray
    u: np.ndarray
    eps: np.ndarray
    s0: np.ndarray
    history: list = field(default_factory=list)
    residual: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.history)


def _factor(A, what: str):
    if A.shape[0] == 0:
        return None
    try:
        # singularity is judged from the pivots below
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(A, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SolveError(f"{what} could not be factorised: {exc}") from exc
    d = np.abs(np.diag(lu[0]))
    if d.min() <= np.finfo(float).eps * d.max() * A.shape[0]:
        raise SolveError(f"{what} is numerically singular (pivot ratio {d.min() / d.max():.3g})")
    return lu


def _solve(lu, b):
    if lu is None:
        return np.zeros_like(b)
    return sla.lu_solve(lu, b)


def _fields(S: SystemMatrices, x, s0):
    u = S.Ahat @ x + S.cbar
    if s0.size:
        u = u + S.B0bar @ s0
    eps = S.Bhat @ u if S.Bhat.size else np.zeros(0)
    return u, eps


def _residual(S: SystemMatrices, x, s0) -> float:
    rhs = S.r + (S.B0 @ s0 if s0.size else 0.0)
    return float(np.linalg.norm(S.L @ x - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))


def _condensation(S: SystemMatrices):
    """Strain map eps = A x + b with the initial-stress coupling eliminated."""
    C = S.Bhat @ S.Ahat
    C0 = S.Bhat @ S.B0bar
    cc = S.Bhat @ S.cbar
    K = np.eye(len(cc)) - C0 @ S.Delta
    lu = _factor(K, "I - C0 (D - D_incl)")
    return _solve(lu, C), _solve(lu, cc)


def solve_onestep(S: SystemMatrices, opts: SolveOptions | None = None) -> SolveResult:
    if S.Delta.size == 0:
        x = _solve(_factor(S.L, "L"), S.r)
        u, eps = _fields(S, x, np.zeros(0))
        return SolveResult("onestep", x, u, eps, np.zeros(0), [], _residual(S, x, np.zeros(0)))
    A, b = _condensation(S)
    Lp = S.L - S.B0 @ (S.Delta @ A)
    rp = S.r + S.B0 @ (S.Delta @ b)
    x = _solve(_factor(Lp, "modified left-hand side"), rp)
    eps = A @ x + b
    s0 = S.Delta @ eps
    u, _ = _fields(S, x, s0)
    return SolveResult("onestep", x, u, eps, s0, [], _residual(S, x, s0))


def solve_coupled(S: SystemMatrices, opts: SolveOptions | None = None) -> SolveResult:
    n = S.L.shape[0]
    m = S.Delta.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = S.L
    rhs = np.concatenate([S.r, S.Bhat @ S.cbar if m else np.zeros(0)])
    if m:
        K[:n, n:] = -S.B0 @ S.Delta
        K[n:, :n] = -S.Bhat @ S.Ahat
        K[n:, n:] = np.eye(m) - S.Bhat @ S.B0bar @ S.Delta
    sol = _solve(_factor(K, "coupled block system"), rhs)
    x, eps = sol[:n], sol[n:]
    s0 = S.Delta @ eps if m else np.zeros(0)
    u, _ = _fields(S, x, s0)
    return SolveResult("coupled", x, u, eps, s0, [], _residual(S, x, s0))


def solve_newton_modified(S: SystemMatrices, opts: SolveOptions | None = None) -> SolveResult:
    """Fixed left-hand side, right-hand side updated with the initial-stress
    increment of every iteration; stops on the relative increment norm."""
    opts = opts or SolveOptions(method="newton")
    lu = _factor(S.L, "L")
    x = _solve(lu, S.r)
    s0 = np.zeros(S.Delta.shape[0])
    history = []
    for it in range(1, opts.max_iter + 1):
        u, eps = _fields(S, x, s0)
        s_new = S.Delta @ eps if s0.size else s0
        dx = _solve(lu, S.B0 @ (s_new - s0)) if s0.size else np.zeros_like(x)
        x = x + dx
        s0 = s_new
        nx = np.linalg.norm(x)
        rel = float(np.linalg.norm(dx) / nx) if nx > 0 else 0.0
        history.append(rel)
        log.debug("newton iteration %d: relative increment %.3e", it, rel)
        if rel < opts.tol:
            break
    else:
        raise ConvergenceError(f"no convergence after {opts.max_iter} iterations (last increment {history[-1]:.3e})",
                               history)
    u, eps = _fields(S, x, s0)
    s0 = S.Delta @ eps if s0.size else s0
    return SolveResult("newton", x, u, eps, s0, history, _residual(S, x, s0))


def solve(S: SystemMatrices, opts: SolveOptions | None = None) -> SolveResult:
    opts = opts or SolveOptions()
    fn = {"onestep": solve_onestep, "coupled": solve_coupled, "newton": solve_newton_modified}[opts.method]
    return fn(S, opts)


def recover_fields(result: SolveResult, S: SystemMatrices, problem: Problem) -> dict:
    """Grid stresses (D eps - s0) for volume inclusions and axial forces for bars."""
    D = elasticity_matrix(problem.material)
    out = {"stress": [], "bar_force": []}
    for incl, (a, b) in zip(problem.inclusions, S.grid_offsets):
        eps = result.eps[6 * a: 6 * b].reshape(-1, 6)
        s0 = result.s0[6 * a: 6 * b].reshape(-1, 6)
        if isinstance(incl, LinearInclusion):
            force = incl.material.E * eps[:, 2] * np.pi * incl.radius**2
            out["bar_force"].append(force)
            out["stress"].append(np.zeros_like(eps))
        else:
            out["stress"].append(eps @ D.T - s0)
            out["bar_force"].append(np.zeros(0))
    return out
