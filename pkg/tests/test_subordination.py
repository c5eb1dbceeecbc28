import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frihls.errors import DomainError
from frihls.kernels import poisson_kernel
from frihls.mixture import GaussianMixture
from frihls.subordination import (CLOSED_FORM_HALF, TALBOT, StableSpec, chapman_kolmogorov_check, constant_factor,
                                  estimate_fit, fractional_laplacian_apply, generator_oracle, laplace_transform,
                                  laplacian_constant, scaling_check, stable_cdf, stable_density, stable_quantile,
                                  subordinate_kernel)


def half_stable(t, s):
    # Levy density: t / (2 sqrt(pi)) s^(-3/2) exp(-t^2 / (4 s))
    return t / (2.0 * math.sqrt(math.pi)) * s ** -1.5 * math.exp(-t * t / (4.0 * s))


def gauss_laplacian_at_origin(beta, d):
    # -(-Delta)^beta exp(-|x|^2/2) at 0 = -2^beta Gamma(beta + d/2) / Gamma(d/2)
    return -2.0 ** beta * math.gamma(beta + d / 2.0) / math.gamma(d / 2.0)


def test_spec_validation():
    for beta in (0.0, 1.0, 1.2):
        with pytest.raises(DomainError):
            StableSpec(beta)
    with pytest.raises(DomainError):
        StableSpec(0.3, 1.0, CLOSED_FORM_HALF)
    with pytest.raises(DomainError):
        StableSpec(0.5, -1.0)
    assert StableSpec(0.5).method == CLOSED_FORM_HALF
    assert StableSpec(0.3).method == TALBOT


@pytest.mark.parametrize("s", [0.05, 0.3, 1.0, 4.0, 50.0])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_talbot_matches_half_stable_closed_form(s, t):
    spec = StableSpec(0.5, t, TALBOT)
    assert stable_density(spec, s) == pytest.approx(half_stable(t, s), rel=1e-8)
    assert stable_density(StableSpec(0.5, t), s) == pytest.approx(half_stable(t, s), rel=1e-14)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_laplace_round_trip_and_mass(beta, t):
    spec = StableSpec(beta, t)
    assert laplace_transform(spec, 0.0) == pytest.approx(1.0, abs=1e-6)
    for y in (0.25, 1.0, 4.0):
        assert laplace_transform(spec, y) == pytest.approx(math.exp(-t * y ** beta), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(beta=st.sampled_from([0.3, 0.5, 0.7]), b=st.floats(0.25, 4.0), u=st.floats(0.1, 10.0))
def test_scaling_identity(beta, b, u):
    assert scaling_check(StableSpec(beta, 1.0, TALBOT), b, u).rel_err < 1e-6


def test_cdf_and_quantile_half_stable():
    spec = StableSpec(0.5, 1.0)
    cdf, surv = stable_cdf(spec, 1.0)
    assert cdf[0] == pytest.approx(math.erfc(0.5), rel=1e-14)
    assert cdf[0] + surv[0] == pytest.approx(1.0, rel=1e-15)
    for p in (1e-3, 0.5, 0.999):
        s = stable_quantile(spec, p)
        assert stable_cdf(spec, s)[0][0] == pytest.approx(p, rel=1e-8)


def test_talbot_cdf_is_monotone():
    spec = StableSpec(0.7, 1.0)
    s = np.geomspace(0.05, 100.0, 40)
    cdf, surv = stable_cdf(spec, s)
    assert np.all(np.diff(cdf) >= -1e-12)
    assert np.allclose(cdf + surv, 1.0, atol=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_half_subordinated_kernel_is_poisson(d, t):
    r = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, 12)])
    assert np.allclose(subordinate_kernel(0.5, t, r, d), poisson_kernel(d, t, r), rtol=1e-6)


@pytest.mark.parametrize("beta,s,t,x,y", [(0.5, 0.5, 1.0, 0.0, 0.7), (0.3, 1.0, 0.5, 0.2, -0.4),
                                          (0.7, 0.5, 0.5, 0.0, 1.5)])
def test_chapman_kolmogorov(beta, s, t, x, y):
    assert chapman_kolmogorov_check(beta, s, t, x, y)[2] < 1e-4


def test_fit_constants_for_cauchy_kernel():
    # d = 1, beta = 1/2: q / comparison = (t + r)^2 / (pi (t^2 + r^2)), which ranges over [1/pi, 2/pi]
    fit = estimate_fit(0.5, 1)
    assert fit.C1 == pytest.approx(1.0 / math.pi, rel=1e-6)
    assert 0.99 * 2.0 / math.pi < fit.C2 <= 2.0 / math.pi * (1 + 1e-6)
    assert fit.c_best == pytest.approx(math.sqrt(fit.C1 * fit.C2))
    assert fit.to_csv().splitlines()[0] == "beta,d,t,r,q_value,comparison_value,ratio"


@pytest.mark.parametrize("beta,d", [(0.3, 1), (0.7, 2)])
def test_fit_constants_are_finite(beta, d):
    fit = estimate_fit(beta, d)
    assert 0 < fit.C1 <= fit.C2 < np.inf
    assert fit.spread < 50


def test_constant_factor():
    for beta in (0.25, 0.5, 0.75):
        for d in (1, 2, 3):
            assert constant_factor(beta, d) == pytest.approx(2.0 ** -beta / beta, rel=1e-13)
    with pytest.raises(DomainError):
        laplacian_constant(0.5, 1, "other")


@pytest.mark.parametrize("beta,d", [(0.5, 1), (0.25, 1), (0.75, 2), (0.5, 3)])
def test_fractional_laplacian_of_gaussian(beta, d):
    value = fractional_laplacian_apply(GaussianMixture.gaussian(d), beta, np.zeros(d))
    assert value == pytest.approx(gauss_laplacian_at_origin(beta, d), rel=1e-6)


def test_fractional_laplacian_half_in_one_dimension():
    assert fractional_laplacian_apply(GaussianMixture.gaussian(1), 0.5, 0.0) == pytest.approx(
        -math.sqrt(2.0 / math.pi), rel=1e-7)


def test_generator_matches_singular_integral():
    f = GaussianMixture(1, [1.0, -0.5], [0.0, 1.0], [1.0, 0.5])
    x = np.array([0.0, 0.8])
    ref = fractional_laplacian_apply(f, 0.5, x)
    assert np.allclose(generator_oracle(f, 0.5, x), ref, rtol=0.02)
