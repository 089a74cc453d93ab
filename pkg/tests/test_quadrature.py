import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracpseudo import (
    InvalidParams,
    QuadratureFailure,
    QuadratureSpec,
    convolve_points,
    convolve_uniform,
    ml_eval_array,
)


def _closed_linear(alpha, beta, rho, t, c0, c1):
    # int_0^t s^(beta-1) E_{a,b}(-rho s^a) (c0 + c1 (t - s)) ds
    z = -rho * t**alpha
    return c0 * t**beta * ml_eval_array(alpha, beta + 1, z) + c1 * t ** (beta + 1) * ml_eval_array(
        alpha, beta + 2, z
    )


def test_linear_integrand_is_exact():
    a, b, rho = 0.6, 0.6, 3.0
    res = convolve_uniform(a, b, rho, lambda s: 2.0 + 0.5 * s, 1.0, 16, QuadratureSpec(64))
    t = np.linspace(0, 1, 17)
    np.testing.assert_allclose(res.values, _closed_linear(a, b, rho, t, 2.0, 0.5), atol=1e-14)
    assert res.panels == 64


def test_exponential_kernel_against_closed_form():
    rho = 2.0
    t = np.linspace(0, 2, 9)
    exact = (rho * np.sin(t) - np.cos(t) + np.exp(-rho * t)) / (1 + rho**2)
    res = convolve_uniform(1.0, 1.0, rho, np.sin, 2.0, 8, QuadratureSpec(256, 1e-10))
    np.testing.assert_allclose(res.values, exact, atol=1e-10)


def test_points_rule_matches_uniform():
    a, b, rho = 0.4, 1.0, 5.0
    spec = QuadratureSpec(512, 1e-9)
    u = convolve_uniform(a, b, rho, np.cos, 1.0, 8, spec).values
    p = convolve_points(a, b, rho, np.cos, np.linspace(0, 1, 9), spec).values
    np.testing.assert_allclose(p, u, atol=1e-9)


def test_refines_until_tolerance():
    res = convolve_uniform(0.7, 0.7, 1.0, lambda s: np.sin(10 * s), 1.0, 4, QuadratureSpec(8, 1e-6))
    assert res.panels >= 64 and res.error_estimate <= 1e-6 * max(1.0, np.max(np.abs(res.values)))


def test_failure_when_budget_runs_out():
    spec = QuadratureSpec(4, 1e-14, max_panels=8)
    with pytest.raises(QuadratureFailure, match="exceeds tolerance"):
        convolve_uniform(0.7, 0.7, 1.0, lambda s: np.sin(40 * s), 1.0, 4, spec)


@pytest.mark.parametrize("kw", [{"panels": 1}, {"tol": 0.0}, {"panels": 64, "max_panels": 32}])
def test_spec_validation(kw):
    with pytest.raises(InvalidParams):
        QuadratureSpec(**kw)


@given(st.floats(0.2, 1.0), st.floats(0.01, 50.0), st.floats(-3, 3), st.floats(-3, 3))
def test_affine_sources_exact(a, rho, c0, c1):
    res = convolve_uniform(a, a, rho, lambda s: c0 + c1 * s, 1.0, 4, QuadratureSpec(8))
    t = np.linspace(0, 1, 5)
    # g(t - s) = c0 + c1 (t - s) once the convolution variable is swapped
    np.testing.assert_allclose(
        res.values, _closed_linear(a, a, rho, t, c0, c1), atol=1e-13 * max(1, abs(c0), abs(c1))
    )
