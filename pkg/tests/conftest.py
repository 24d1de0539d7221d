import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qfsource import field_dynamics as fd
from qfsource.mode_basis import build_lattice
from qfsource.sources import TimeProfile, GaussianDipole, make_switched_dipole

settings.register_profile("qfsource", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qfsource")

# shared switched-dipole scenario: box L = 1, width 0.05, 2 drive cycles per unit time
L_BOX = 1.0
OMEGA_D = 2 * math.pi * 2
T_OBS = 0.5


@pytest.fixture(scope="session")
def dipole():
    return make_switched_dipole((0.0, 0.0, 1.0), OMEGA_D, 0.15, width=0.05)


@pytest.fixture(scope="session")
def bipolar():
    prof = TimeProfile("bipolar", omega_d=OMEGA_D, tau=0.15, asym=0.5)
    return GaussianDipole(np.array([0.3, 0.0, 1.0]), prof, 0.05)


@pytest.fixture(scope="session")
def box_points():
    return fd.box_grid(L_BOX, 17)


class _Runs:
    """Lattices and amplitudes at T_OBS, computed once per n_max."""

    def __init__(self, source):
        self.source = source
        self.cache = {}

    def __call__(self, n_max):
        if n_max not in self.cache:
            lat = build_lattice(L_BOX, n_max)
            self.cache[n_max] = (lat, fd.evolve_amplitudes(lat, self.source, T_OBS))
        return self.cache[n_max]


@pytest.fixture(scope="session")
def dipole_runs(dipole):
    return _Runs(dipole)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
