import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab.rates import TooFewSamples, fit_exponential


@given(st.floats(-3, 3), st.floats(-5, 5), st.integers(3, 30))
def test_exact_exponential_recovered(slope, intercept, n):
    # derived: noiseless log-linear data is fitted exactly
    x = np.arange(n, dtype=float)
    fit = fit_exponential(x, np.exp(intercept + slope * x))
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.intercept == pytest.approx(intercept, abs=1e-8)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_samples == n and fit.n_excluded == 0


def test_noise_floor_excludes_samples():
    x = np.arange(10.0)
    y = np.exp(-2 * x)
    fit = fit_exponential(x, y, noise_floor=1e-6)
    assert fit.n_samples == 7 and fit.n_excluded == 3
    assert fit.slope == pytest.approx(-2)


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        fit_exponential([1, 2, 3], [1.0, 1e-20, 1e-20], noise_floor=1e-10)
    with pytest.raises(TooFewSamples):
        fit_exponential([1, 1, 1], [1.0, 2.0, 3.0])


def test_shape_mismatch():
    with pytest.raises(ValueError):
        fit_exponential([1, 2, 3], [1, 2])


def test_predict_and_dict():
    fit = fit_exponential([0, 1, 2], np.exp([1.0, 0.5, 0.0]))
    np.testing.assert_allclose(fit.predict([0, 2]), np.exp([1.0, 0.0]))
    assert set(fit.to_dict()) == {"slope", "intercept", "r2", "n_samples", "n_excluded"}


def test_nonpositive_values_dropped():
    fit = fit_exponential([0, 1, 2, 3], [1.0, np.exp(-1), 0.0, np.exp(-3)])
    assert fit.n_excluded == 1 and fit.slope == pytest.approx(-1)
