import numpy as np
import pytest

from explab.distributions import Distribution, MixedSource
from explab.exponents import TestingProblem


def random_dist(rng, k, floor=0.02):
    """Random full-support distribution with every entry at least ``floor``."""
    x = rng.dirichlet(np.ones(k))
    x = floor + (1 - k * floor) * x
    return Distribution(x / x.sum())


def random_mixture(rng, k, components):
    w = rng.dirichlet(np.ones(components)) * 0.9 + 0.1 / components
    return MixedSource(w / w.sum(), tuple(random_dist(rng, k) for _ in range(components)))


@pytest.fixture
def ber_problem():
    return TestingProblem.simple(Distribution.bernoulli(0.3), Distribution.bernoulli(0.5))


@pytest.fixture
def mixed_problem():
    null = MixedSource(
        np.array([0.6, 0.4]), (Distribution.bernoulli(0.3), Distribution.bernoulli(0.8))
    )
    return TestingProblem(null, MixedSource.singleton(Distribution.bernoulli(0.5)))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[num])
