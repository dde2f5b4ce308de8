from fractions import Fraction

import numpy as np
import pytest

from discqueue.errors import InsufficientDepthError
from discqueue.model import PrecisionPolicy, make_params
from discqueue.oracle import TruncatedGenerator, choose_truncation, transient_uniformization
from discqueue.series import build_l_triangle, evaluate_transient
from discqueue.triangle import TriangleCache


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (deselect with -m 'not slow')")


@pytest.fixture
def unit_params():
    return make_params(1, 1)


@pytest.fixture(scope="session")
def unit_triangle():
    return build_l_triangle(make_params(1, 1), 80)


@pytest.fixture
def triangle_cache(tmp_path):
    return TriangleCache(str(tmp_path / "cache"))


@pytest.fixture
def certified_series():
    """Evaluate the series, deepening the triangle to the recommended depth when told to."""
    def evaluate(params, tau, k_max, policy=None, depth=80, attempts=4):
        policy = policy or PrecisionPolicy()
        for _ in range(attempts):
            triangle = build_l_triangle(params, depth)
            try:
                return evaluate_transient(triangle, params, tau, k_max, policy)
            except InsufficientDepthError as e:
                assert e.recommended_depth > depth
                depth = e.recommended_depth
        pytest.fail(f"series not certified after {attempts} depth increases")
    return evaluate


@pytest.fixture
def uniformization_oracle():
    """p(k, τ) from uniformization, with τ in the series' rescaled time."""
    def evaluate(params, tau, epsilon=1e-10, k_min=0):
        t = Fraction(tau) / params.lam
        k_max = max(choose_truncation(params, t, epsilon), k_min)
        return transient_uniformization(TruncatedGenerator.from_rates(params, k_max), t, epsilon)
    return evaluate


@pytest.fixture
def rk4_oracle():
    """Fixed-step fourth-order Runge-Kutta integration of the truncated master equations."""
    def integrate(params, tau, k_max=40, steps=2000):
        q = TruncatedGenerator.from_rates(params, k_max).matrix() / float(params.lam)
        p = np.zeros(k_max + 1)
        p[0] = 1.0
        h = float(tau) / steps
        for _ in range(steps):
            k1 = p @ q
            k2 = (p + 0.5 * h * k1) @ q
            k3 = (p + 0.5 * h * k2) @ q
            k4 = (p + h * k3) @ q
            p = p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return p
    return integrate
