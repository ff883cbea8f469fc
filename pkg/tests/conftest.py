import math

import numpy as np
import pytest
from hypothesis import settings
from scipy import integrate

from mellin_deconv import Gamma, MellinContext, Uniform01, contaminate, sample

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

FIXTURE_SEED = 2021


def fixture_sample(seed=FIXTURE_SEED, n=200):
    """The n=200 fixture: Gamma(4, scale 2) target, Uniform(0,1) noise."""
    x = sample(Gamma(4, 2), n, seed, 0, 0)
    u = sample(Uniform01(), n, seed, 0, 1)
    return contaminate(x, u)


@pytest.fixture
def fixture_y():
    return fixture_sample()


@pytest.fixture
def ctx1():
    return MellinContext(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def spatial_profiles(estimates, half_width, ppd=40, chunk=2000):
    """``x f̂_k(x)`` on a Simpson grid in ``u = log x`` over ``[-half_width, half_width]``."""
    m = int(2 * half_width / math.log(10) * ppd) // 2 * 2
    u = np.linspace(-half_width, half_width, m + 1)
    x = np.exp(u)
    out = {}
    for k, est in estimates.items():
        parts = [est.on_mesh([x[i : i + chunk]]) * x[i : i + chunk] for i in range(0, x.size, chunk)]
        out[k] = np.concatenate(parts)
    return u, out


def spatial_gaps(estimates, pairs):
    """||f̂_a - f̂_b||² (weight x, c = 1) by spatial quadrature.

    The squared difference decays like 1/u², so the window error is O(1/U);
    two windows are combined by Richardson extrapolation.
    """
    out = {}
    u1, p1 = spatial_profiles(estimates, 150.0)
    u2, p2 = spatial_profiles(estimates, 300.0)
    for a, b in pairs:
        i1 = integrate.simpson((p1[a] - p1[b]) ** 2, x=u1)
        i2 = integrate.simpson((p2[a] - p2[b]) ** 2, x=u2)
        out[a, b] = 2 * i2 - i1
    return out


ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
