from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oseledets_lab.dynamics import FlowPoint, Observable, cat_suspension, sample_volume
from oseledets_lab.errors import SkippedTruncated
from oseledets_lab.regularity import (
    SyntheticIntegrand,
    audit_down,
    audit_product,
    check_down,
    product_bound,
    regularity_D,
    regularity_D_batch,
    regularity_R_batch,
    remark_identity,
    theoremC_chain,
)

COS = SyntheticIntegrand.cosine()


def test_cosine_closed_form():
    rec = regularity_D(None, COS, None, 0.5, 20.0)
    assert rec.log_D == pytest.approx(math.sqrt(0.75) - math.pi / 6, abs=1e-12)
    assert rec.T_eps == pytest.approx(math.pi / 3, abs=1e-12)
    assert not rec.truncated


def test_level_above_sup_short_circuits(cat, half_cos):
    rec = regularity_D(cat, half_cos, FlowPoint((0.1, 0.2)), 0.5, 50.0)
    assert rec.log_D == 0.0 and rec.T_eps == 0.0 and not rec.truncated
    assert regularity_D(None, COS, None, 1.5, 10.0).log_D == 0.0


def test_constant_observable_is_regular(cat):
    rec = regularity_D(cat, Observable.constant(0.4), FlowPoint((0.1, 0.2)), 0.1, 50.0)
    assert rec.log_D == 0.0 and rec.T_eps == 0.0


def test_short_horizon_is_flagged():
    rec = regularity_D(None, SyntheticIntegrand(lambda t: np.ones_like(t), lambda t: t, 1.0, 0.0), None, 0.5, 3.0)
    assert rec.truncated
    with pytest.raises(SkippedTruncated):
        check_down(None, SyntheticIntegrand(lambda t: np.ones_like(t), lambda t: t, 1.0, 0.0), None, 0.2, 0.5, 3.0)


@pytest.mark.parametrize("eps", [0.2, 0.5, 0.8])
def test_remark_identity_on_cosine(eps):
    rc = remark_identity(None, COS, None, eps, 1000, 20.0)
    assert rc.within_envelope().all()
    assert rc.deviation.max() < 1e-4


def test_down_and_product_on_cosine():
    lhs, rhs, ok = check_down(None, COS, None, 0.2, 0.6, 20.0)
    assert ok and lhs <= rhs + 1e-12
    lhs, rhs, ok = product_bound(None, COS, None, 0.3, 7, 20.0)
    assert ok


def test_batch_matches_single(cat, half_cos):
    pts = sample_volume(cat, 1, 4)
    b = regularity_D_batch(cat, half_cos, pts, [0.1, 0.3], 60.0)
    for j, p in enumerate(pts):
        rec = regularity_D(cat, half_cos, p, 0.3, 60.0)
        assert rec.log_D == pytest.approx(b.log_D[1, j], abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.02, 0.45), st.floats(0.02, 0.45), st.integers(0, 1000))
def test_down_property_on_suspension(a, b, seed):
    eta, eps = sorted((a, b))
    if eps - eta < 1e-3:
        eps = eta + 1e-3
    flow = cat_suspension(kappa=0.05)
    u = Observable(0.0, (((1, 0), 0.3, 0.1, 0), ((0, 1), 0.2, 0.0, 1)))
    pts = sample_volume(flow, seed, 40)
    au = audit_down(flow, u, pts, eta, eps, 80.0)
    assert au.violations == 0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.4), st.floats(0.01, 0.4), st.integers(0, 1000))
def test_monotone_in_level(a, b, seed):
    lo, hi = sorted((a, b))
    flow = cat_suspension()
    pts = sample_volume(flow, seed, 40)
    batch = regularity_D_batch(flow, Observable.cosine(0.5), pts, [lo, hi], 80.0)
    assert np.all(batch.log_D[0] >= batch.log_D[1] - 1e-12)
    assert np.all(batch.T_eps[0] >= batch.T_eps[1] - 1e-12) or np.all(batch.truncated.any(axis=0))


def test_product_bound_on_suspension(cat, half_cos):
    au = audit_product(cat, half_cos, sample_volume(cat, 2, 200), 0.2, 5, 80.0)
    assert au.violations == 0 and au.checked > 190


def test_unperturbed_bundle_is_regular():
    flow = cat_suspension()
    chi = math.log((3 + math.sqrt(5)) / 2)
    b = regularity_R_batch(flow, sample_volume(flow, 0, 20), [0.1], 50.0, chi)
    assert np.all(np.abs(b.log_D) < 1e-9)


def test_chain_on_sheared_suspension():
    flow = cat_suspension(kappa=0.05)
    chk = theoremC_chain(flow, sample_volume(flow, 4, 100), 0.3, 0.1, 100.0, math.log((3 + math.sqrt(5)) / 2))
    assert chk.audit.violations == 0


def test_fiber_dependent_scan_matches_dense_time_stepping():
    from oseledets_lab.dynamics import evolve_points

    flow = cat_suspension(kappa=0.05)
    u = Observable(0.0, (((1, 0), 0.3, 0.1, 0), ((0, 1), 0.2, 0.0, 1)))
    pts = sample_volume(flow, 1, 10)
    T, dt = 6.0, 5e-4
    n = int(round(T / dt))
    vals = np.empty((n + 1, len(pts)))
    cur = pts
    for i in range(n + 1):
        vals[i] = u(cur.x, cur.s / flow.roof(cur.x))
        if i < n:
            cur = evolve_points(flow, cur, dt)
    integral = np.concatenate([np.zeros((1, len(pts))), np.cumsum(0.5 * (vals[1:] + vals[:-1]) * dt, axis=0)])
    t = np.arange(n + 1) * dt
    for level in (0.1, 0.2):
        brute = (integral - level * t[:, None]).max(axis=0)
        scanned = regularity_D_batch(flow, u, pts, [level], T).log_D[0]
        # trapezoid error at the fiber jumps is O(dt) per crossing
        np.testing.assert_allclose(scanned, brute, atol=2e-4)
