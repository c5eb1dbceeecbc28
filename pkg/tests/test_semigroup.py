import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frihls.errors import DomainError, PreconditionError
from frihls.mixture import GaussianMixture
from frihls.quadrature import panel_rule, radial_lq_integral, sphere_area, sphere_rule
from frihls.semigroup import (GridField, apply_heat, apply_heat_grid, default_t_grid, heat_values, maximal_function,
                              maximal_norm_ratio, ultracontractivity_constant)

mixtures = st.builds(
    lambda seed, d: GaussianMixture.random(np.random.default_rng(seed), d),
    st.integers(0, 2 ** 32 - 1), st.integers(1, 3),
)


def gauss_max_function(d, x2):
    # sup_t (1+t)^(-d/2) exp(-x^2 / (2(1+t))) is attained at 1+t = x^2/d when x^2 > d
    return (d / x2) ** (d / 2) * math.exp(-d / 2) if x2 > d else math.exp(-x2 / 2)


def gauss_ultracontractivity(d, p):
    # sup_t t^(d/2p) (1+t)^(-d/2) at t = 1/(p-1), divided by ||f||_p = (2 pi / p)^(d/2p)
    t = 1.0 / (p - 1.0)
    return t ** (d / (2 * p)) * (1 + t) ** (-d / 2) / (2 * math.pi / p) ** (d / (2 * p))


# -- mixtures ----------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0])
def test_gaussian_lp_norm(d, p):
    f = GaussianMixture.gaussian(d)
    assert f.lp_norm(p) == pytest.approx((2 * math.pi / p) ** (d / (2 * p)), rel=1e-9)


def test_sup_norm_of_signed_mixture():
    f = GaussianMixture(1, [1.0, -2.0], [0.0, 5.0], [1.0, 1.0])
    # the peak sits at x = 5 + 2.5 e^-12.5, to leading order
    assert f.sup_norm() == pytest.approx(2.0 - math.exp(-12.5) + 6.25 * math.exp(-25.0), rel=1e-14)
    assert f.lp_norm(np.inf) == f.sup_norm()


def test_mixture_validation():
    with pytest.raises(DomainError):
        GaussianMixture(1, [1.0], [0.0], [0.0])
    with pytest.raises(DomainError):
        GaussianMixture(2, [1.0, 2.0], [[0.0, 0.0]], [1.0, 1.0])
    f = GaussianMixture.gaussian(2)
    with pytest.raises(AttributeError):
        f.dim = 3


def test_dilation_and_mass():
    f = GaussianMixture(2, [1.5, -0.5], [[0.0, 1.0], [1.0, -1.0]], [0.5, 2.0])
    lam = 3.0
    x = np.array([[0.2, 0.1], [-0.3, 0.4]])
    assert np.allclose(f.dilated(lam)(x), f(lam * x), rtol=1e-14)
    assert f.dilated(lam).mass == pytest.approx(f.mass / lam ** 2, rel=1e-14)


def test_gram_and_dirichlet_closed_forms():
    f = GaussianMixture.gaussian(3)
    assert f.gram(f) == pytest.approx(math.pi ** 1.5, rel=1e-14)
    # int |grad e^{-|x|^2/2}|^2 = int |x|^2 e^{-|x|^2} = (d/2) pi^(d/2)
    assert f.dirichlet(f) == pytest.approx(1.5 * math.pi ** 1.5, rel=1e-14)


# -- heat flow ---------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(f=mixtures, s=st.floats(0.0, 20.0), t=st.floats(0.0, 20.0))
def test_semigroup_law(f, s, t):
    x = np.linspace(-3, 3, 7)[:, None] * np.ones((1, f.dim))
    lhs = apply_heat(apply_heat(f, s), t)(x)
    rhs = apply_heat(f, s + t)(x)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-15 * np.max(np.abs(rhs)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.01, 50.0), p=st.sampled_from([1.0, 2.0, np.inf]))
def test_contraction(seed, t, p):
    f = GaussianMixture.random(np.random.default_rng(seed), 1)
    assert f.heat(t).lp_norm(p) <= f.lp_norm(p) * (1 + 1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.01, 50.0))
def test_positivity_preserved(seed, t):
    f = GaussianMixture.random(np.random.default_rng(seed), 2, signed=False)
    x = np.random.default_rng(seed + 1).uniform(-8, 8, size=(200, 2))
    assert np.all(apply_heat(f, t)(x) >= 0)


def test_heat_values_match_closed_form():
    f = GaussianMixture.gaussian(1)
    t = np.array([0.5, 2.0])
    x = np.array([[0.0], [1.3]])
    expected = (1 + t)[None, :] ** -0.5 * np.exp(-x ** 2 / (2 * (1 + t)[None, :]))
    assert np.allclose(heat_values(f, x, t), expected, rtol=1e-14)


@pytest.mark.parametrize("d,x", [(1, 0.5), (1, 3.0), (2, 2.5), (3, 0.0), (3, 4.0)])
def test_maximal_function_of_gaussian(d, x):
    pt = np.zeros(d)
    pt[0] = x
    # a maximum over the default time grid: never above the true sup, and close to it
    value = maximal_function(GaussianMixture.gaussian(d), pt)
    exact = gauss_max_function(d, x * x)
    assert value <= exact * (1 + 1e-14)
    assert value == pytest.approx(exact, rel=1e-4)


def test_maximal_function_needs_wide_grid():
    with pytest.raises(DomainError):
        maximal_function(GaussianMixture.gaussian(1), 0.0, t_grid=np.geomspace(1e-2, 1e2, 10))


@pytest.mark.parametrize("d,p", [(1, 1.5), (1, 2.0), (2, 2.0), (3, 4.0)])
def test_ultracontractivity_of_gaussian(d, p):
    assert ultracontractivity_constant(GaussianMixture.gaussian(d), p) == pytest.approx(
        gauss_ultracontractivity(d, p), rel=1e-8)


def test_maximal_ratio_bounded_and_stable_under_refinement():
    f = GaussianMixture(1, [1.0, -0.7], [0.0, 1.5], [1.0, 0.5])
    for p in (1.5, 2.0, 4.0):
        coarse = maximal_norm_ratio(f, p, t_grid=default_t_grid(401))
        fine = maximal_norm_ratio(f, p, t_grid=default_t_grid(801))
        assert 1.0 <= fine < 10.0
        assert abs(coarse / fine - 1) < 0.01


# -- grid fields --------------------------------------------------------------


@pytest.mark.parametrize("d,n", [(1, 256), (2, 64), (3, 64)])
def test_spectral_heat_matches_closed_form(d, n):
    f = GaussianMixture(d, [1.0, -0.5], np.array([[0.5] * d, [-1.0] * d]), [1.0, 0.6])
    G = GridField.from_function(f, d, 12.0, n)
    out = apply_heat_grid(G, 0.8)
    mask = G.interior_mask().reshape(-1)
    ref = f.heat(0.8)(G.points())
    err = np.max(np.abs(out.samples.reshape(-1) - ref)[mask]) / np.max(np.abs(ref))
    assert err < 1e-6


def test_grid_field_round_trip(tmp_path):
    G = GridField.from_function(GaussianMixture.gaussian(2), 2, 8.0, 16)
    assert GridField.from_bytes(G.to_bytes()) == G
    path = tmp_path / "field.bin"
    G.save(path)
    assert GridField.load(path) == G


def test_grid_field_decay_precondition():
    G = GridField.from_function(GaussianMixture.gaussian(1, width2=25.0), 1, 4.0, 64)
    with pytest.raises(PreconditionError):
        apply_heat_grid(G, 1.0)


def test_grid_field_power_of_two():
    with pytest.raises(DomainError):
        GridField(1, 1.0, 12, np.zeros(12))


# -- quadrature ----------------------------------------------------------------


def test_panel_rule_exact_for_polynomials():
    x, w = panel_rule(np.linspace(0, 2, 5), 8)
    assert np.sum(w * x ** 15) == pytest.approx(2 ** 16 / 16, rel=1e-13)


@pytest.mark.parametrize("d,n", [(1, 1), (2, 32), (3, 16)])
def test_sphere_rule_weights(d, n):
    dirs, w = sphere_rule(d, n)
    assert np.sum(w) == pytest.approx(2.0 if d == 1 else sphere_area(d), rel=1e-13)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_radial_integral_with_power_tail():
    # int_R 1/(1+x^2) dx = pi, with a slowly decaying tail handled analytically
    value, tail, gamma = radial_lq_integral(lambda p: 1.0 / (1.0 + p[:, 0] ** 2), [0.0], 1, 1.0, 2.0, 1e4,
                                            expected_exponent=-2.0)
    assert value == pytest.approx(math.pi, rel=1e-7)
    assert 0 < tail < 1e-3
    assert gamma == pytest.approx(-2.0, abs=1e-6)
