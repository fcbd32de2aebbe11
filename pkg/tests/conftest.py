import numpy as np
import pytest

from stokes_darcy.assembly import ModelParams
from stokes_darcy.manufactured import example51_case
from stokes_darcy.mesh import DomainSpec, build_structured_mesh, example51_domain
from stokes_darcy.spaces import build_spaces


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def case(params):
    return example51_case(params)


@pytest.fixture(scope="session")
def mesh4():
    return build_structured_mesh(example51_domain(), 4)


@pytest.fixture(scope="session")
def spaces4(mesh4):
    return build_spaces(mesh4)


def tiny_domain():
    """Half-unit squares: two triangles per subdomain at n = 2."""
    return DomainSpec(((0.0, 0.5), (0.0, 0.5)), ((0.0, 0.5), (0.5, 1.0)))


@pytest.fixture(scope="session")
def tiny_mesh():
    return build_structured_mesh(tiny_domain(), 2)


@pytest.fixture(scope="session")
def small_mesh():
    """Fluid (0,1)x(0,1/2) below porous (0,1)x(1/2,1), n = 2."""
    return build_structured_mesh(DomainSpec(((0.0, 1.0), (0.0, 0.5)), ((0.0, 1.0), (0.5, 1.0))), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    """Collected lines are printed as one block at the end of the session."""
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
