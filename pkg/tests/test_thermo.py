from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oseledets_lab.dynamics import Observable, cat_suspension
from oseledets_lab.errors import AllZeroCounts, DegenerateProfile
from oseledets_lab.thermo import (
    beta_curve,
    beta_mc,
    exceedance_decay,
    integrability_threshold,
    legendre,
    lemmaT_tail,
    periodic_points,
    pressure_flow,
    pressure_po,
    symmetric_grid,
    tail_rate_empirical,
    wilson_interval,
)

CAT = ((2, 1), (1, 1))
LOG_LAMBDA = math.log((3 + math.sqrt(5)) / 2)


def _brute_fixed(A, n):
    M = np.linalg.matrix_power(np.array(A), n) - np.eye(2, dtype=int)
    d = abs(round(np.linalg.det(M)))
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    cand = np.stack([i.ravel(), j.ravel()], axis=1)
    ok = np.all((cand @ M.T) % d == 0, axis=1)
    return {tuple(r) for r in cand[ok]}, d


def test_fixed_point_counts():
    assert [periodic_points(CAT, n).count for n in (1, 2, 3, 4)] == [1, 5, 16, 45]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_periodic_points_match_brute_force(n):
    pp = periodic_points(CAT, n)
    brute, d = _brute_fixed(CAT, n)
    assert pp.denominator == d
    assert {tuple(int(v) for v in r) for r in pp.numerators} == brute


@pytest.mark.parametrize("A", [((2, 1), (1, 1)), ((3, 1), (2, 1)), ((1, 1), (1, 2)), ((5, 2), (2, 1))])
def test_counts_follow_lucas_formula(A):
    tr = A[0][0] + A[1][1]
    lam = (tr + math.sqrt(tr * tr - 4)) / 2
    for n in range(1, 7):
        assert periodic_points(A, n).count == round(lam**n + lam**-n - 2)


def test_zero_potential_pressure_is_entropy():
    seq = pressure_po(Observable.constant(0.0), 12)
    assert seq.value == pytest.approx(LOG_LAMBDA, abs=1e-4)


def test_constant_potential_shifts_pressure():
    assert pressure_po(Observable.constant(0.7), 10).value == pytest.approx(
        pressure_po(Observable.constant(0.0), 10).value + 0.7, abs=1e-12
    )


def test_flow_pressure_scales_with_constant_roof():
    p1 = pressure_flow(Observable.constant(0.0), cat_suspension(), 10)
    p2 = pressure_flow(Observable.constant(0.0), cat_suspension(r0=2.0), 10)
    assert p2 == pytest.approx(p1 / 2, abs=1e-12)


def test_flow_pressure_with_variable_roof_lies_between_bounds():
    flow = cat_suspension(roof_terms=(((1, 0), 0.1, 0.0),))
    p = pressure_flow(Observable.constant(0.0), flow, 10)
    assert LOG_LAMBDA / 1.1 <= p <= LOG_LAMBDA / 0.9


def test_beta_curve_and_rate_function(cat):
    curve = beta_curve(Observable.cosine(1.0), cat, symmetric_grid(2.0, 0.05), 12)
    assert curve.beta[curve.t == 0][0] == 0.0
    assert curve.is_convex()
    prof = legendre(curve)
    assert prof.H_at(prof.chi)[0] <= 1e-3
    assert prof.is_convex()
    assert np.isinf(prof.H_at(5.0)[0])
    assert curve.second_derivative_at_zero() == pytest.approx(0.5, abs=0.02)


def test_constant_observable_gives_degenerate_profile(cat):
    curve = beta_curve(Observable.constant(0.3), cat, symmetric_grid(1.0, 0.1), 8)
    prof = legendre(curve)
    assert prof.degenerate
    assert prof.H_at(0.3)[0] == 0.0 and np.isinf(prof.H_at(0.4)[0])
    with pytest.raises(DegenerateProfile):
        integrability_threshold(prof, 0.3, 0.5, 0.1)


def test_monte_carlo_curve_of_constant_is_exact(cat):
    c = beta_mc(Observable.constant(0.5), cat, [-1.0, 0.0, 1.0], 10.0, 100, 0)
    np.testing.assert_allclose(c.beta, [-0.5, 0.0, 0.5])


def test_monte_carlo_curve_near_zero(cat):
    t = symmetric_grid(0.5, 0.25)
    po = beta_curve(Observable.cosine(1.0), cat, t, 12)
    mc = beta_mc(Observable.cosine(1.0), cat, t, 50.0, 20_000, 1)
    assert np.max(np.abs(po.beta - mc.beta)) < 0.02


def test_threshold_of_half_cosine(cat):
    prof = legendre(beta_curve(Observable.cosine(0.5), cat, symmetric_grid(4.0, 0.05), 12))
    p = integrability_threshold(prof, 0.0, 0.5, 0.25)
    assert 1.5 < p < 3.0


@settings(max_examples=40)
@given(st.integers(0, 1000), st.integers(1000, 5000))
def test_wilson_interval_contains_the_estimate(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(np.array([k]), n)
    assert lo[0] <= k / n <= hi[0]
    assert 0.0 <= lo[0] and hi[0] <= 1.0


def test_exceedance_decay_of_exponential_sample():
    x = np.random.default_rng(0).exponential(1 / 0.3, 200_000)
    rate, counts = exceedance_decay(x, np.arange(5.0, 26.0, 5.0))
    assert rate == pytest.approx(0.3, rel=0.05)
    assert np.all(np.diff(counts) <= 0)
    with pytest.raises(AllZeroCounts):
        exceedance_decay(np.zeros(10), [1.0, 2.0])


def test_tail_rate_without_exceedances_raises(cat):
    I = np.zeros((2, 100))
    with pytest.raises(AllZeroCounts):
        tail_rate_empirical(cat, Observable.cosine(0.5), 0.3, [10.0, 20.0], 100, 0, integrals=I)


def test_lemma_bins(cat):
    prof = legendre(beta_curve(Observable.cosine(0.5), cat, symmetric_grid(4.0, 0.05), 12))
    T = np.random.default_rng(0).exponential(2.0, 5000)
    rep = lemmaT_tail(T, 0.25, 2.0, prof, 0.0)
    assert rep.counts.sum() == np.sum(T > 1.0)
    assert rep.rate_reference == pytest.approx(float(prof.H_at(0.125)[0]))
    with pytest.raises(ValueError):
        lemmaT_tail(T, 0.25, 1.0, prof, 0.0)


@pytest.mark.parametrize("sigma2", [0.25, 1.0, 3.0])
def test_gaussian_conjugate_is_exact_on_grid(sigma2):
    from oseledets_lab.thermo import PressureCurve

    t = symmetric_grid(2.0, 0.1)
    prof = legendre(PressureCurve(t, 0.5 * sigma2 * t**2, "synthetic", 0))
    np.testing.assert_allclose(prof.H, prof.a**2 / (2 * sigma2), atol=1e-12)
    assert prof.second_derivative_at_chi() == pytest.approx(1 / sigma2, rel=1e-9)
    assert abs(prof.rho(prof.chi)) <= 0.1
