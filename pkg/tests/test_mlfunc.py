import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erfcx

from fracpseudo import (
    InvalidParams,
    MLAccuracy,
    MLParams,
    mittag_leffler,
    ml_complement,
    ml_eval,
    ml_eval_array,
    ml_kernel_derivative,
    ml_simon_bounds,
)

# E_{alpha,beta}(-x) from Talbot inversion of s^(alpha-beta) / (s^alpha + x), 40 digits
LAPLACE_REFERENCE = [
    (0.75, 1.0, 2.0, 0.20207848341295445435),
    (0.3, 1.0, 10.0, 0.072649729072772086177),
    (0.6, 0.6, 5.0, 0.01173276740608441217),
    (0.9, 1.9, 50.0, 0.019956492938462859247),
    (0.5, 1.5, 3.0, 0.27366628293953668319),
    (0.25, 1.0, 0.001, 0.99889786464078012424),
    (0.8, 1.8, 1000.0, 0.00099978190424477251619),
    (0.45, 1.0, 40.0, 0.01539953272989516735),
    # near alpha = 2/3 the Poincare expansion stays inaccurate up to x ~ 150
    (0.67, 1.0, 60.0, 0.0062255532614932996773),
    (0.67, 2.67, 100.0, 0.0098887973561134438469),
    (0.7, 0.7, 20.0, 0.0006329972460096978347),
    (0.4, 3.0, 4.0, 0.1313469630464139311),
]


@pytest.mark.parametrize("alpha,beta,x,ref", LAPLACE_REFERENCE)
def test_matches_laplace_inversion(alpha, beta, x, ref):
    assert ml_eval(MLParams(alpha, beta), -x) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("alpha,beta,x,ref", LAPLACE_REFERENCE)
def test_array_path_matches_laplace_inversion(alpha, beta, x, ref):
    # 64 copies push the evaluation through the interpolation tables
    v = ml_eval_array(alpha, beta, np.full(64, -x))
    assert np.all(np.abs(v - ref) <= 1e-14)


def test_half_order_is_scaled_erfc():
    assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(0.4275836, abs=1e-7)
    for x in (0.01, 0.3, 1.0, 4.0, 7.5, 9.0, 30.0, 400.0):
        assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(erfcx(x), abs=1e-14)


def test_exponential_and_first_integral():
    assert mittag_leffler(1.0, 1.0, -1.0) == pytest.approx(math.exp(-1.0), abs=1e-15)
    for z in (-0.5, -3.0, -20.0):
        assert mittag_leffler(1.0, 2.0, z) == pytest.approx(math.expm1(z) / z, abs=1e-14)


def test_value_at_zero_is_reciprocal_gamma():
    for a, b in ((0.3, 1.0), (0.7, 1.7), (1.0, 2.5)):
        assert mittag_leffler(a, b, 0.0) == pytest.approx(1.0 / math.gamma(b), rel=1e-15)


def test_positive_arguments_use_series():
    # E_{1/2,1}(x) = exp(x^2) erfc(-x)
    assert mittag_leffler(0.5, 1.0, 1.5) == pytest.approx(
        math.exp(2.25) * math.erfc(-1.5), rel=1e-13
    )


def test_array_matches_scalar_over_all_branches():
    x = np.concatenate([np.geomspace(1e-6, 5e3, 300), [0.0]])
    for a, b in ((0.4, 1.0), (0.75, 1.75), (0.9, 0.9)):
        arr = ml_eval_array(a, b, -x)
        ref = np.array([mittag_leffler(a, b, -v) for v in x])
        assert np.max(np.abs(arr - ref)) <= 2e-14


def test_complement_avoids_cancellation():
    x = 1e-12
    # 1 - E(-x) ~ x / Gamma(1 + alpha)
    assert ml_complement(0.6, x) == pytest.approx(x / math.gamma(1.6), rel=1e-9)
    assert ml_complement(0.6, 3.0) == pytest.approx(1 - mittag_leffler(0.6, 1, -3.0), abs=1e-15)


def test_kernel_derivative_matches_finite_difference():
    a, rho, s, h = 0.7, 2.0, 0.8, 1e-5
    fd = (mittag_leffler(a, 1, -rho * (s + h) ** a) - mittag_leffler(a, 1, -rho * (s - h) ** a)) / (2 * h)
    assert ml_kernel_derivative(a, rho, s) == pytest.approx(fd, rel=1e-8)


def test_simon_bounds_known_values():
    lo, hi = ml_simon_bounds(0.5, 1.0)
    assert lo == pytest.approx(1 / (1 + math.sqrt(math.pi)), rel=1e-15)
    assert hi == pytest.approx(1 / (1 + 1 / math.gamma(1.5)), rel=1e-15)
    assert lo < mittag_leffler(0.5, 1, -1.0) < hi


@pytest.mark.parametrize(
    "call",
    [
        lambda: MLParams(0.0, 1.0),
        lambda: MLParams(1.2, 1.0),
        lambda: MLParams(0.5, -1.0),
        lambda: mittag_leffler(0.5, 1.0, math.nan),
        lambda: ml_simon_bounds(1.0, 1.0),
        lambda: ml_simon_bounds(0.5, -1.0),
        lambda: MLAccuracy(abs_tol=1e-18),
    ],
)
def test_rejects_invalid_input(call):
    with pytest.raises(InvalidParams):
        call()


alphas = st.floats(0.05, 0.99)
xs = st.floats(0.0, 1e4)


@given(alphas, xs)
def test_inside_simon_bounds(a, x):
    lo, hi = ml_simon_bounds(a, x)
    v = mittag_leffler(a, 1.0, -x)
    assert lo - 1e-15 <= v <= hi + 1e-15


@given(alphas, st.floats(0.0, 1e3), st.floats(1e-6, 1e2))
def test_completely_monotone_decrease(a, x, dx):
    assert mittag_leffler(a, 1.0, -(x + dx)) <= mittag_leffler(a, 1.0, -x) + 1e-15


@given(alphas, st.floats(0.1, 3.0), xs)
def test_recurrence_between_beta_levels(a, b, x):
    # E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)
    lhs = mittag_leffler(a, b, -x)
    rhs = 1.0 / math.gamma(b) - x * mittag_leffler(a, a + b, -x)
    scale = max(1.0, 1.0 / math.gamma(b), x * abs(mittag_leffler(a, a + b, -x)))
    assert abs(lhs - rhs) <= 1e-13 * scale
