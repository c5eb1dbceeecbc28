import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frihls.errors import DomainError, SingularityError
from frihls.kernels import (HeatKernelSpec, RieszKernelSpec, grad_bound_margin, grad_heat_kernel, heat_kernel,
                            log_heat_kernel, poisson_kernel, riesz_constant, riesz_kernel)
from frihls.quadrature import panel_rule, sphere_area

# max over u of u exp(-u^2/4) / 4, attained at u = sqrt(2); the same in every dimension
MARGIN_PEAK = math.sqrt(2.0) * math.exp(-0.5) / 4.0


def test_heat_kernel_peak_value():
    for d in (1, 2, 3):
        assert heat_kernel(HeatKernelSpec(1.0, d), 0.0, 1.0) == pytest.approx((2 * math.pi) ** (-d / 2), rel=1e-15)


def test_heat_kernel_sigma_sqrt2_is_analyst_normalization():
    spec = HeatKernelSpec(math.sqrt(2.0), 1)
    r, t = 0.7, 0.3
    expected = (4 * math.pi * t) ** -0.5 * math.exp(-r * r / (4 * t))
    assert heat_kernel(spec, r, t) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_heat_kernel_normalization(d, t):
    r, w = panel_rule(np.linspace(0.0, 40.0 * math.sqrt(t), 81), 16)
    area = 2.0 if d == 1 else sphere_area(d)
    total = area * np.sum(w * r ** (d - 1) * heat_kernel(HeatKernelSpec(1.0, d), r, t))
    assert abs(total - 1.0) < 1e-8


def test_heat_kernel_underflow_is_exact_zero():
    assert heat_kernel(HeatKernelSpec(1.0, 1), 1e3, 1e-3) == 0.0
    assert np.isfinite(log_heat_kernel(HeatKernelSpec(1.0, 1), 1e3, 1e-3))


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(DomainError):
        heat_kernel(HeatKernelSpec(), 1.0, 0.0)


def test_kernel_semigroup_property_d1():
    spec = HeatKernelSpec(1.0, 1)
    z, w = panel_rule(np.linspace(-60.0, 60.0, 401), 16)
    for x, s, t in [(0.3, 0.5, 1.5), (-2.0, 0.1, 4.0), (1.1, 3.0, 3.0)]:
        lhs = np.sum(w * heat_kernel(spec, np.abs(x - z), s) * heat_kernel(spec, np.abs(z), t))
        assert lhs == pytest.approx(heat_kernel(spec, abs(x), s + t), rel=1e-8)


def test_grad_heat_kernel_matches_finite_difference():
    spec = HeatKernelSpec(1.0, 2)
    x, t, h = np.array([0.4, -0.9]), 0.7, 1e-6
    g = grad_heat_kernel(spec, x, t)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (heat_kernel(spec, np.linalg.norm(x + e), t) - heat_kernel(spec, np.linalg.norm(x - e), t)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_grad_margin_peak_is_frozen(d):
    t = 0.37
    x = np.zeros(d)
    x[0] = math.sqrt(2.0 * t)
    assert grad_bound_margin(HeatKernelSpec(1.0, d), x, t) == pytest.approx(MARGIN_PEAK, rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(d=st.integers(1, 3), logt=st.floats(-3, 3), u=st.floats(0, 1e3), seed=st.integers(0, 2 ** 32 - 1))
def test_grad_margin_never_exceeds_one(d, logt, u, seed):
    t = 10.0 ** logt
    direction = np.random.default_rng(seed).normal(size=d)
    x = u * math.sqrt(t) * direction / np.linalg.norm(direction)
    m = grad_bound_margin(HeatKernelSpec(1.0, d), x, t)
    assert 0.0 <= m <= MARGIN_PEAK * (1 + 1e-12)


def test_riesz_constant_known_case():
    # I_2 in d = 3 is twice the Newtonian potential: kernel 1 / (2 pi r)
    assert riesz_constant(2.0, 3) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(d=st.integers(1, 3), frac=st.floats(0.05, 0.95), r=st.floats(1e-3, 1e3))
def test_riesz_homogeneity(d, frac, r):
    alpha = frac * d
    spec = RieszKernelSpec(alpha, d)
    assert riesz_kernel(spec, r) * r ** (d - alpha) == pytest.approx(spec.constant, rel=1e-12)


def test_riesz_kernel_singularity_and_domain():
    spec = RieszKernelSpec(0.5, 1)
    with pytest.raises(SingularityError):
        riesz_kernel(spec, 0.0)
    with pytest.raises(DomainError):
        RieszKernelSpec(1.0, 1)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("y", [0.1, 1.0, 10.0])
def test_poisson_kernel_normalization(d, y):
    edges = np.concatenate([[0.0], np.geomspace(1e-3 * y, 1e9 * y, 121)])
    r, w = panel_rule(edges, 16)
    area = 2.0 if d == 1 else sphere_area(d)
    c = math.gamma((d + 1) / 2) / math.pi ** ((d + 1) / 2)
    total = area * np.sum(w * r ** (d - 1) * poisson_kernel(d, y, r)) + area * c * y / edges[-1]
    assert total == pytest.approx(1.0, abs=1e-8)


def test_poisson_kernel_values():
    assert poisson_kernel(1, 1.0, 0.0) == pytest.approx(1.0 / math.pi, rel=1e-15)
    assert poisson_kernel(2, 1.0, 0.0) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)
