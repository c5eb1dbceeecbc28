import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frihls.errors import BudgetError, ConditioningError, DomainError
from frihls.fractional import (FractionalParams, MellinQuadrature, deterministic_projection, fourier_fractional,
                               fractional_pairing, gaussian_fractional_closed_form, hls_majorization,
                               mellin_fractional_integral, projection_constant_candidates,
                               projection_limit_constant, riesz_convolution_oracle, sobolev_check)
from frihls.kernels import riesz_constant
from frihls.mixture import GaussianMixture
from frihls.quadrature import sphere_area
from frihls.semigroup import GridField

EVALUATORS = [mellin_fractional_integral, riesz_convolution_oracle, gaussian_fractional_closed_form]


def centre_value(d, alpha):
    # I_alpha of exp(-|x|^2/2) at the origin: Gamma((d - alpha)/2) / Gamma(d/2)
    return math.gamma((d - alpha) / 2) / math.gamma(d / 2)


def gauss_pairing(d, alpha):
    # <I_alpha f, f> = 2^(alpha/2) int |xi|^(-alpha) e^(-|xi|^2) dxi
    area = 2.0 if d == 1 else sphere_area(d)
    return 2 ** (alpha / 2) * area / 2 * math.gamma((d - alpha) / 2)


# -- parameters -----------------------------------------------------------------


def test_params_derive_q():
    P = FractionalParams(1.0, 2.0, 3)
    assert P.q == pytest.approx(6.0, rel=1e-15)
    assert 1 / P.q == pytest.approx(1 / P.p - P.alpha / P.dim, abs=1e-16)


@pytest.mark.parametrize("alpha,p,d", [(1.0, 3.0, 3), (0.5, 1.0, 1), (1.0, 2.5, 2), (3.0, 1.5, 3)])
def test_params_reject_invalid(alpha, p, d):
    with pytest.raises(DomainError):
        FractionalParams(alpha, p, d)


def test_params_reject_wrong_q():
    with pytest.raises(DomainError):
        FractionalParams(1.0, 2.0, 3, q=5.0)


# -- the three evaluators ---------------------------------------------------------


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (2, 0.5), (2, 1.0), (3, 0.5), (3, 1.0), (3, 2.0)])
@pytest.mark.parametrize("evaluate", EVALUATORS, ids=["mellin", "riesz", "closed_form"])
def test_gaussian_centre_value(d, alpha, evaluate):
    f = GaussianMixture.gaussian(d)
    assert evaluate(f, alpha, np.zeros(d)) == pytest.approx(centre_value(d, alpha), rel=1e-8)


def test_forced_value_d3_alpha2():
    assert mellin_fractional_integral(GaussianMixture.gaussian(3), 2.0, np.zeros(3)) == pytest.approx(2.0, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 3), frac=st.sampled_from([0.25, 0.5, 0.8]))
def test_triple_oracle_agreement(seed, d, frac):
    rng = np.random.default_rng(seed)
    f = GaussianMixture.random(rng, d, signed=False)
    alpha = frac * d if d > 1 else 0.5
    x = rng.uniform(-3, 3, size=(4, d))
    vals = [np.atleast_1d(ev(f, alpha, x)) for ev in EVALUATORS]
    for v in vals[:2]:
        assert np.allclose(v, vals[2], rtol=1e-7)


def test_far_field_decay():
    f = GaussianMixture(1, [1.0, 0.5], [0.0, 1.0], [1.0, 0.5])
    alpha = 0.5
    x = np.array([1e4, 1e5])
    lead = riesz_constant(alpha, 1) * f.mass * np.abs(x) ** (alpha - 1)
    assert np.allclose(gaussian_fractional_closed_form(f, alpha, x), lead, rtol=1e-3)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), lam=st.floats(0.25, 4.0))
def test_homogeneity(seed, lam):
    rng = np.random.default_rng(seed)
    f = GaussianMixture.random(rng, 2)
    x = rng.uniform(-2, 2, size=(3, 2))
    lhs = mellin_fractional_integral(f.dilated(lam), 1.0, x)
    rhs = lam ** -1.0 * mellin_fractional_integral(f, 1.0, lam * x)
    assert np.allclose(lhs, rhs, rtol=1e-4)


def test_linearity_on_a_common_rule():
    rng = np.random.default_rng(3)
    f, g = GaussianMixture.random(rng, 2), GaussianMixture.random(rng, 2)
    x = rng.uniform(-2, 2, size=(5, 2))
    quad = MellinQuadrature(1e-60, 1e60, 80, 12)
    lhs = mellin_fractional_integral(f.scaled(2.0) + g.scaled(-3.0), 0.7, x, quad=quad)
    rhs = 2 * mellin_fractional_integral(f, 0.7, x, quad=quad) - 3 * mellin_fractional_integral(g, 0.7, x, quad=quad)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-15)


def test_tail_certificate_refinement():
    f = GaussianMixture(1, [1.0, -0.4], [0.0, 2.0], [1.0, 2.0])
    for tol in (1e-4, 1e-6, 1e-8):
        v1 = mellin_fractional_integral(f, 0.5, 0.3, tol=tol)
        v2 = mellin_fractional_integral(f, 0.5, 0.3, tol=tol / 2)
        assert abs(v1 - v2) < tol


def test_certificate_rejects_short_range():
    with pytest.raises(BudgetError):
        mellin_fractional_integral(GaussianMixture.gaussian(1), 0.5, 0.0, quad=MellinQuadrature(1e-2, 1e2, 8, 8))


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (2, 1.0), (3, 2.0)])
def test_pairing_closed_form(d, alpha):
    f = GaussianMixture.gaussian(d)
    assert fractional_pairing(f, f, alpha) == pytest.approx(gauss_pairing(d, alpha), rel=1e-9)


# -- Fourier route -------------------------------------------------------------------


def test_fourier_route_rejects_massive_field():
    G = GridField.from_function(GaussianMixture.gaussian(3), 3, 20.0, 64)
    with pytest.raises(ConditioningError) as info:
        fourier_fractional(G, 2.0)
    assert info.value.neglected_mass == pytest.approx((2 * math.pi) ** 1.5, rel=1e-6)


def test_fourier_route_with_mass_correction():
    G = GridField.from_function(GaussianMixture.gaussian(3), 3, 20.0, 64)
    out = fourier_fractional(G, 2.0, mass_correction=True)
    assert out.samples[G.center_index()] == pytest.approx(2.0, rel=1e-6)


def test_fourier_route_zero_mass_field():
    # no mass, so no correction; the only error is from periodic images, which shrink with the box
    f = GaussianMixture(2, [1.0, -1.0], [[0.5, 0.0], [-0.5, 0.0]], [1.0, 1.0])
    errs = []
    for half_width, n in ((20.0, 256), (40.0, 512)):
        G = GridField.from_function(f, 2, half_width, n)
        out = fourier_fractional(G, 1.0)
        pts = G.points()
        near = np.linalg.norm(pts, axis=1) <= 5.0
        ref = gaussian_fractional_closed_form(f, 1.0, pts[near])
        errs.append(np.max(np.abs(out.samples.reshape(-1)[near] - ref)) / np.max(np.abs(ref)))
    assert errs[0] < 2e-3
    assert errs[1] < errs[0] / 4


# -- projection ------------------------------------------------------------------------


def test_projection_limit_constant_value():
    assert projection_limit_constant(1.0) == pytest.approx(math.sqrt(math.pi / 8), rel=1e-15)
    c = projection_constant_candidates(0.5)
    assert c["printed_rescaled_to_sigma1"] == pytest.approx(c["sigma1_derivation"], rel=1e-14)


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_projection_converges_in_d3(alpha):
    f = GaussianMixture.gaussian(3)
    x = np.zeros(3)
    ref = mellin_fractional_integral(f, alpha, x)
    r100 = deterministic_projection(f, alpha, 100.0, x) / ref
    r1000 = deterministic_projection(f, alpha, 1000.0, x) / ref
    assert abs(r1000 / r100 - 1) < 0.01
    assert r1000 == pytest.approx(projection_limit_constant(alpha), rel=0.005)


def test_projection_small_horizon_expansion():
    # for small a the integrand is s^(alpha/2) Delta f(x), so S ~ -Delta f(x) a^(1+alpha/2) / (1+alpha/2)
    f = GaussianMixture.gaussian(1)
    a, alpha = 1e-6, 0.5
    expected = 1.0 * a ** (1 + alpha / 2) / (1 + alpha / 2)
    assert deterministic_projection(f, alpha, a, 0.0) == pytest.approx(expected, rel=1e-5)


# -- majorization and Sobolev -----------------------------------------------------------


def test_majorization_holds_on_samples():
    rng = np.random.default_rng(11)
    for _ in range(4):
        f = GaussianMixture.random(rng, 1)
        params = FractionalParams(0.5, 1.5, 1)
        for x in rng.uniform(-4, 4, size=3):
            rec = hls_majorization(f, params, x)
            assert rec.holds
            assert rec.combined_bound == pytest.approx(rec.J_bound + rec.K_bound)


def test_sobolev_ratio_is_dilation_invariant():
    f = GaussianMixture.gaussian(3)
    r1 = sobolev_check(GridField.from_function(f, 3, 12.0, 64), 1.5).ratio
    r2 = sobolev_check(GridField.from_function(f.dilated(0.5), 3, 24.0, 64), 1.5).ratio
    assert np.isfinite(r1) and r1 > 0
    assert r2 == pytest.approx(r1, rel=1e-6)


def test_sobolev_domain():
    G = GridField.from_function(GaussianMixture.gaussian(1), 1, 12.0, 64)
    with pytest.raises(DomainError):
        sobolev_check(G, 1.5)
    Z = GridField(2, 4.0, 8, np.zeros(64))
    assert math.isnan(sobolev_check(Z, 1.5).ratio)
