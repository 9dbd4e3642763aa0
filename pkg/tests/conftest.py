import sys

import numpy as np
import pytest

from smsn.distributions import Degenerate, ScaleMixtureSN, SkewT, Slash, make_params


def random_spd(rng, d, spread=1.0):
    A = rng.normal(size=(d, d))
    scales = np.exp(rng.uniform(-spread, spread, size=d))
    M = A @ A.T + d * np.eye(d)
    D = np.diag(scales / np.sqrt(np.diag(M)))
    return D @ M @ D


def random_params(rng, d, alpha_scale=3.0):
    xi = rng.normal(size=d)
    Omega = random_spd(rng, d)
    alpha = rng.normal(scale=alpha_scale, size=d)
    return make_params(xi, Omega, alpha)


MIXINGS = [Degenerate(), SkewT(8.0), Slash(6.0)]


def random_dist(rng, d, mixing=None):
    if mixing is None:
        mixing = MIXINGS[rng.integers(len(MIXINGS))]
    return ScaleMixtureSN(random_params(rng, d), mixing)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
