import numpy as np
import pytest
from hypothesis import settings

from steklov_lab import annulus, disk, solve_spectrum, weight_preset
from steklov_lab.geometry import Circle, KoebeDomain

settings.register_profile("lab", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("lab")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def unit_disk():
    return disk()


@pytest.fixture(scope="session")
def cosine_disk():
    return disk(weight_preset("cosine-bump", 0.3))


@pytest.fixture(scope="session")
def three_circles():
    return KoebeDomain(Circle((0, 0), 1.0), (Circle((0.45, 0.1), 0.2), Circle((-0.4, -0.25), 0.15)))


@pytest.fixture(scope="session")
def disk_spectrum(unit_disk):
    return solve_spectrum(unit_disk, 128, 41)


@pytest.fixture(scope="session")
def annulus_spectrum():
    """eps = 0.5, M = 256: covers both branches up to lambda ~ 40."""
    return solve_spectrum(annulus(0.5), 256, 124)


@pytest.fixture(scope="session")
def small_annulus_spectrum():
    return solve_spectrum(annulus(0.5), 64, 40)


@pytest.fixture(scope="session")
def cosine_spectrum(cosine_disk):
    return solve_spectrum(cosine_disk, 128, 40)


@pytest.fixture(scope="session")
def three_spectrum(three_circles):
    return solve_spectrum(three_circles, 64, 30)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
