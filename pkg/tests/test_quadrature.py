import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modone.quadrature import integrate


def test_gaussian_integral():
    r = integrate(lambda x: np.exp(-x * x))
    assert r.converged
    assert r.value == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_integrable_singularity_with_breakpoint():
    r = integrate(lambda x: np.abs(x) ** -0.5 * np.exp(-x * x), points=[0.0], atol=1e-9, rtol=1e-9)
    assert r.converged
    assert r.value == pytest.approx(math.gamma(0.25), rel=1e-8)


def test_vector_valued_integrand_shares_partition():
    r = integrate(lambda x: np.stack([np.sin(x), np.cos(x)], axis=1), 0.0, math.pi)
    assert np.allclose(r.value, [2.0, 0.0], atol=1e-12)


def test_non_convergence_is_reported():
    r = integrate(lambda x: 1.0 / np.abs(x - 0.3), 0.0, 1.0, limit=50)
    assert not r.converged


def test_bounds_validation():
    with pytest.raises(ValueError):
        integrate(np.sin, 1.0, 0.0)


@settings(max_examples=1000, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 5.0))
def test_shifted_scaled_gaussian(mu, s):
    r = integrate(lambda x: np.exp(-0.5 * ((x - mu) / s) ** 2), points=[mu])
    assert r.value == pytest.approx(s * math.sqrt(2 * math.pi), rel=1e-9)
