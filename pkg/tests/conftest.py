import numpy as np
import pytest

from hfcrit.config import load_builtin_basis
from hfcrit.integrals import MolecularSystem, build_gaussian_integrals


def atom_tables(Z, n_electrons, basis_name):
    system = MolecularSystem([(Z, (0.0, 0.0, 0.0))], n_electrons)
    basis = load_builtin_basis(basis_name, (0.0, 0.0, 0.0))
    return system, basis, build_gaussian_integrals(system, basis)


@pytest.fixture(scope="session")
def hydrogen():
    return atom_tables(1, 1, "hydrogenic_s10")


@pytest.fixture(scope="session")
def hydrogen_z2():
    return atom_tables(2, 1, "hydrogenic_s10")


@pytest.fixture(scope="session")
def helium_like():
    return atom_tables(2, 2, "he_like_diffuse_s14")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
