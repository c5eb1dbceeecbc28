import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from frihls.errors import DomainError
from frihls.fractional import FractionalParams, gaussian_fractional_closed_form
from frihls.hls import (SCHEMA, HlsEntry, HlsReport, SweepConfig, dilation_invariance_check, function_family,
                        hls_ratio, lq_norm_of_fractional, sweep)
from frihls.mixture import GaussianMixture

P1 = FractionalParams(0.5, 1.5, 1)


def lq_norm_by_quad(f, alpha, q):
    # independent 1-D oracle: adaptive quadrature of the closed-form potential on each half-line
    g = lambda x: abs(float(gaussian_fractional_closed_form(f, alpha, x))) ** q
    total = sum(quad(g, lo, hi, limit=400, epsabs=0, epsrel=1e-12)[0]
                for lo, hi in ((-np.inf, -50), (-50, 50), (50, np.inf)))
    return total ** (1.0 / q)


@pytest.mark.parametrize("f", [GaussianMixture.gaussian(1), GaussianMixture(1, [1.0, -0.6], [0.0, 1.5], [1.0, 0.5])])
def test_norm_matches_independent_quadrature(f):
    norm, tail, _ = lq_norm_of_fractional(f, 0.5, P1.q)
    assert norm == pytest.approx(lq_norm_by_quad(f, 0.5, P1.q), rel=1e-8)
    assert 0 <= tail < 1e-3


@pytest.mark.parametrize("method", ["mellin", "riesz", "fourier"])
def test_methods_agree(method):
    f = GaussianMixture(2, [1.0, 0.5], [[0.0, 0.0], [1.0, 0.5]], [1.0, 0.6])
    params = FractionalParams(1.0, 1.5, 2)
    ref = hls_ratio(f, params, "fourier").ratio
    assert hls_ratio(f, params, method).ratio == pytest.approx(ref, rel=1e-6)


@settings(max_examples=7, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_critical_ratio_is_dilation_invariant(seed):
    f = GaussianMixture.random(np.random.default_rng(seed), 1)
    rec = dilation_invariance_check(f, P1)
    assert rec.max_rel_spread < 1e-6


def test_wrong_exponent_scaling_law():
    f = GaussianMixture.gaussian(2)
    params = FractionalParams(1.0, 1.5, 2)
    rec = dilation_invariance_check(f, params, q=4.0)
    assert rec.predicted_multipliers[0] == pytest.approx(0.25 ** (2 * (1 / params.q - 0.25)))
    assert max(rec.multiplier_errors) < 1e-6
    assert rec.max_rel_spread > 0.1


def test_input_checks():
    with pytest.raises(DomainError):
        hls_ratio(GaussianMixture(1, [0.0], [0.0], [1.0]), P1)
    with pytest.raises(DomainError):
        hls_ratio(GaussianMixture.gaussian(2), P1)
    with pytest.raises(TypeError):
        hls_ratio(GaussianMixture.gaussian(1), (0.5, 1.5, 1))
    with pytest.raises(DomainError):
        dilation_invariance_check(GaussianMixture.gaussian(1), P1, lambdas=(0.01, 1.0))
    with pytest.raises(DomainError):
        hls_ratio(GaussianMixture.gaussian(1), P1, method="other")


def test_family_is_seeded():
    a, b = function_family(2, 6, 11), function_family(2, 6, 11)
    assert [i for i, _ in a] == ["gauss", "mix001", "mix002", "mix003", "mix004", "mix005"]
    assert all(fa == fb for (_, fa), (_, fb) in zip(a, b))
    assert function_family(2, 6, 12)[1][1] != a[1][1]
    for _, f in a:
        assert abs(f.mass) >= 0.05 * np.sum(np.abs(f.term_masses))


def test_empty_family():
    rep = sweep(SweepConfig(family_size=0))
    assert rep.entries == []
    assert rep.to_csv() == "d,alpha,p,q,f_id,norm_f_p,norm_If_q,ratio,method,status\n"
    assert json.loads(rep.to_json())["schema"] == SCHEMA


def test_singleton_family():
    rep = sweep(SweepConfig(family_size=1))
    (entry,) = rep.entries
    assert entry.f_id == "gauss"
    assert rep.empirical_constant(1, 0.5, 1.5) == entry.ratio
    assert rep.cells["d=1,alpha=0.5,p=1.5"]["running_max"] == [entry.ratio]


@pytest.fixture(scope="module")
def sweep10():
    return sweep(SweepConfig(family_size=10, ps=(1.5, 3.0)))


def test_empirical_constant_is_running_max(sweep10):
    ratios = [e.ratio for e in sweep10.entries if e.p == 1.5]
    cell = sweep10.cells["d=1,alpha=0.5,p=1.5"]
    assert len(ratios) == 10
    assert cell["empirical_C"] == max(ratios)
    assert cell["running_max"] == list(np.maximum.accumulate(ratios))
    assert sweep10.constants["C[d=1,alpha=0.5,p=1.5]"] == max(ratios)


def test_invalid_cell_is_recorded(sweep10):
    # p = 3 is outside (1, d/alpha) = (1, 2)
    assert sweep10.cells["d=1,alpha=0.5,p=3"]["status"] == "invalid"
    assert not sweep10.failed


def test_report_round_trip(sweep10):
    rep = HlsReport(list(sweep10.entries), dict(sweep10.constants), dict(sweep10.cells))
    rep.entries.append(HlsEntry(1, 0.5, 1.5, 6.0, "bad", 1.0, float("nan"), float("nan"), "mellin", "failed", "x"))
    text = rep.to_json()
    assert "NaN" not in text
    back = HlsReport.from_json(text)
    assert back.to_json() == text
    assert math.isnan(back.entries[-1].ratio)
    with pytest.raises(DomainError):
        HlsReport.from_json(json.dumps({"schema": "other"}))
