import dataclasses

import numpy as np
import pytest

from igabem.assembly import SystemMatrices, assemble_system, displacement_at
from igabem.inclusions import LinearInclusion
from igabem.kernels import ElasticConstants, elasticity_matrix
from igabem.oracles import mixtures_estimate
from igabem.solver import (
    ConvergenceError,
    SolveError,
    SolveOptions,
    recover_fields,
    solve,
    solve_coupled,
    solve_newton_modified,
    solve_onestep,
)


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def with_bar_modulus(problem, E):
    bar = problem.inclusions[0]
    new = LinearInclusion(bar.axis, bar.radius, bar.n_points, ElasticConstants(E, bar.material.nu), bar.name)
    return dataclasses.replace(problem, inclusions=[new])


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(method="gmres")
    with pytest.raises(ValueError):
        SolveOptions(tol=0)
    with pytest.raises(ValueError):
        SolveOptions(max_iter=0)


def test_methods_agree_on_example1(example1):
    _, _, _, S = example1
    a = solve_onestep(S)
    b = solve_coupled(S)
    c = solve_newton_modified(S, SolveOptions("newton", tol=1e-13))
    assert rel(b.x, a.x) < 1e-10
    assert rel(c.x, a.x) < 1e-8
    assert a.residual < 1e-10 and b.residual < 1e-10
    assert c.history[-1] < 1e-13


def test_example1_stiffened_top(example1):
    model, problem, op, S = example1
    res = solve(S)
    u = displacement_at(np.array([[0.5, 0.5, 1.0]]), res.x, problem, op, res.s0)[0]
    bar = problem.inclusions[0]
    band = mixtures_estimate(1.0, bar.material.E, bar.radius)
    assert 0.98 < u[2] < 1.0
    assert abs(u[2] - band) < 0.01


def test_bar_force_consistent_with_strain(example1):
    _, problem, _, S = example1
    res = solve(S)
    bar = problem.inclusions[0]
    force = recover_fields(res, S, problem)["bar_force"][0]
    np.testing.assert_allclose(force, bar.material.E * res.eps[2::6] * np.pi * bar.radius**2, rtol=1e-14)
    # nearly uniform axial strain close to the top displacement of a unit-height cube
    assert np.all(np.abs(res.eps[2::6] - 0.993) < 0.01)


def test_zero_contrast_is_neutral(example1):
    _, problem, op, _ = example1
    neutral = with_bar_modulus(problem, problem.material.E)
    S = assemble_system(neutral, op)
    x0 = np.linalg.solve(S.L, S.r)
    for method in ("onestep", "coupled", "newton"):
        res = solve(S, SolveOptions(method))
        assert rel(res.x, x0) < 1e-12
        assert np.abs(res.s0).max() == 0.0


def test_newton_reports_non_convergence(example2):
    _, _, _, S = example2
    with pytest.raises(ConvergenceError) as info:
        solve_newton_modified(S, SolveOptions("newton", tol=1e-14, max_iter=3))
    assert len(info.value.history) == 3


def test_singular_system_detected(example1):
    _, _, _, S = example1
    bad = dataclasses.replace(S, L=np.zeros_like(S.L))
    with pytest.raises(SolveError):
        solve_onestep(bad)


def test_general_inclusion_stress(example2):
    _, problem, _, S = example2
    res = solve(S)
    stress = recover_fields(res, S, problem)["stress"][0]
    Dinc = elasticity_matrix(problem.inclusions[0].material)
    np.testing.assert_allclose(stress, res.eps.reshape(-1, 6) @ Dinc.T, atol=1e-12 * np.abs(stress).max())


def test_no_inclusion_system(cube_problem, cube_operator):
    S = assemble_system(cube_problem, cube_operator)
    assert isinstance(S, SystemMatrices) and S.n_grid == 0
    res = solve(S, SolveOptions("coupled"))
    assert res.residual < 1e-12
