import numpy as np
import pytest

from gradcurl_vem import build_cube_mesh
from gradcurl_vem.assembly import assemble
from gradcurl_vem.manufactured import manufactured_case


@pytest.fixture(scope="session")
def case():
    return manufactured_case()


@pytest.fixture(scope="session")
def cube_meshes():
    return {n: build_cube_mesh(n) for n in (1, 2, 3, 4)}


@pytest.fixture(scope="session")
def cube_systems(cube_meshes, case):
    return {n: assemble(cube_meshes[n], case.f, nu=case.nu) for n in (2, 3, 4)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
