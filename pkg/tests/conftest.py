import numpy as np
import pytest

from wulffkit.norms import EllipsoidalNorm, EuclideanNorm, PerturbedNorm


def make_norms():
    return {
        "euclid2": EuclideanNorm(2),
        "euclid3": EuclideanNorm(3),
        "ellip2": EllipsoidalNorm(np.diag([4.0, 1.0])),
        "ellip3": EllipsoidalNorm(np.array([[3.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 2.0]])),
        "pert2": PerturbedNorm(2, 0.1),
        "pert3": PerturbedNorm(3, 0.1),
    }


NORMS = make_norms()


@pytest.fixture(params=sorted(NORMS))
def spec(request):
    return NORMS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
