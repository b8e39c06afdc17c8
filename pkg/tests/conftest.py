import warnings

import pytest
from scipy.integrate import IntegrationWarning

from hpbem_contact.contact import assemble_system, coulomb_preset, tresca_preset
from hpbem_contact.geometry import initial_mesh
from hpbem_contact.spaces import build_spaces


def pytest_configure(config):
    warnings.filterwarnings("ignore", category=IntegrationWarning)


def small_system(preset="tresca", n_per_unit=4, p=1, **kw):
    spec = (tresca_preset if preset == "tresca" else coulomb_preset)(**kw)
    mesh = initial_mesh(spec.boundary(), n_per_unit, p)
    return spec, assemble_system(spec, mesh, build_spaces(mesh, spec.basis))


@pytest.fixture(scope="session")
def tresca16():
    return small_system("tresca", 4)


@pytest.fixture(scope="session")
def coulomb16():
    return small_system("coulomb", 4)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
