import numpy as np
import pytest

from igabem.assembly import Problem, assemble_boundary, assemble_system
from igabem.kernels import ElasticConstants
from igabem.model_io import build_problem, load_model
from igabem.oracles import unit_cube_patches
from helpers import uniaxial_bcs

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cube_patches():
    return unit_cube_patches()


@pytest.fixture(scope="session")
def cube_problem(cube_patches):
    return Problem(ElasticConstants(1.0, 0.0), cube_patches, uniaxial_bcs())


@pytest.fixture(scope="session")
def cube_operator(cube_problem):
    return assemble_boundary(cube_problem)


@pytest.fixture(scope="session")
def example1():
    model = load_model("example1")
    problem = build_problem(model)
    op = assemble_boundary(problem)
    return model, problem, op, assemble_system(problem, op)


@pytest.fixture(scope="session")
def example2():
    model = load_model("example2")
    problem = build_problem(model)
    op = assemble_boundary(problem)
    return model, problem, op, assemble_system(problem, op)
