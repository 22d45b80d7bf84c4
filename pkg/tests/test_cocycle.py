from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oseledets_lab.cocycle import (
    birkhoff_integrals,
    delta,
    estimate_chi,
    lyapunov_qr,
    lyapunov_qr_points,
    variance_sigma2,
)
from oseledets_lab.dynamics import FlowPoint, Observable, PointSet, cat_suspension, evolve, sample_volume

LOG_LAMBDA = math.log((3 + math.sqrt(5)) / 2)


def test_constant_cocycle_is_linear(cat):
    assert delta(cat, Observable.constant(0.3), FlowPoint((0.2, 0.9), 0.1), 7.0) == pytest.approx(2.1, rel=1e-15)


def test_negative_time_rejected(cat):
    with pytest.raises(ValueError):
        delta(cat, Observable.cosine(), FlowPoint((0.2, 0.9)), -1.0)


def test_base_only_integral_over_whole_roofs(cat):
    u = Observable.cosine(1.0)
    p = FlowPoint((0.1, 0.2), 0.0)
    # three full fibers: u(x) + u(Ax) + u(A^2 x)
    xs = [np.array([0.1, 0.2]), np.array([0.4, 0.3]), np.array([0.1, 0.7])]
    expected = sum(math.cos(2 * math.pi * x[0]) for x in xs)
    assert delta(cat, u, p, 3.0) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.floats(0, 6), st.floats(0, 6))
def test_cocycle_identity(x1, x2, s, t):
    flow = cat_suspension(kappa=0.05, roof_terms=(((1, 1), 0.3, 0.0),))
    u = Observable(0.1, (((1, 0), 0.5, 0.2, 0), ((0, 1), 0.3, 0.0, 1)))
    p = FlowPoint((x1, x2), 0.0)
    whole = delta(flow, u, p, s + t)
    parts = delta(flow, u, p, s) + delta(flow, u, evolve(flow, p, s), t)
    assert whole == pytest.approx(parts, abs=1e-9)


def test_estimate_chi_for_mean_zero_cosine(cat):
    pts = sample_volume(cat, 2, 2000)
    mean, half = estimate_chi(cat, Observable.cosine(0.5), pts, 50.0)
    assert abs(mean) < max(half, 1e-3) * 2
    assert estimate_chi(cat, Observable.constant(1.5), pts, 50.0) == (1.5, 0.0)


def test_birkhoff_integrals_match_single_point(cat):
    pts = sample_volume(cat, 3, 5)
    u = Observable.cosine(0.5)
    batch = birkhoff_integrals(cat, u, pts, 13.3)
    single = [delta(cat, u, p, 13.3) for p in pts]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_lyapunov_exponents_of_cat_suspension(cat):
    lam = lyapunov_qr(cat, FlowPoint((0.3, 0.1), 0.0), 2000.0)
    assert lam[0] == pytest.approx(LOG_LAMBDA, abs=2e-3)
    assert lam[1] == pytest.approx(-LOG_LAMBDA, abs=2e-3)


def test_doubling_the_roof_halves_exponents():
    flow = cat_suspension(r0=2.0)
    lam = lyapunov_qr_points(flow, PointSet(np.array([[0.3, 0.1], [0.7, 0.2]]), np.zeros(2)), 2000.0)
    np.testing.assert_allclose(lam[:, 0], LOG_LAMBDA / 2, atol=2e-3)


def test_variance_of_cosine_is_positive(cat):
    est = variance_sigma2(cat, Observable.cosine(1.0), 200.0, 2000, 0)
    assert not est.degenerate
    assert est.value == pytest.approx(0.5, abs=0.1)


def test_coboundary_is_flagged_degenerate(cat):
    # cos(2 pi (2 x1 + x2)) = cos(2 pi x1) o A, so the difference is a coboundary
    u = Observable(0.0, (((2, 1), 1.0, 0.0, 0), ((1, 0), -1.0, 0.0, 0)))
    est = variance_sigma2(cat, u, 200.0, 2000, 0)
    assert est.degenerate


def test_constant_observable_has_zero_variance(cat):
    est = variance_sigma2(cat, Observable.constant(2.0), 200.0, 100, 0)
    assert est.value == 0.0 and est.degenerate
