from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oseledets_lab.dynamics import (
    BaseMap,
    FlowPoint,
    Observable,
    PointSet,
    RoofFunction,
    bundle_directions,
    cat_suspension,
    evolve,
    evolve_points,
    integrate_observable,
    jacobian_cocycle,
    metric_log_norm,
    metric_weights,
    sample_volume,
    wrap,
)

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


def test_evolve_one_roof_applies_the_base_map(cat):
    q = evolve(cat, FlowPoint((0.1, 0.2), 0.2), 1.0)
    assert q.x == pytest.approx((0.4, 0.3), abs=1e-14)
    assert q.s == pytest.approx(0.2, abs=1e-14)


def test_jacobian_of_unperturbed_cat_is_matrix_power(cat):
    J = jacobian_cocycle(cat, FlowPoint((0.3, 0.7), 0.5), 3.0)
    np.testing.assert_array_equal(np.rint(J), [[13, 8], [8, 5]])
    np.testing.assert_allclose(J, [[13, 8], [8, 5]], atol=1e-12)


def test_sheared_map_preserves_area():
    flow = cat_suspension(kappa=0.05)
    J = jacobian_cocycle(flow, FlowPoint((0.21, 0.63), 0.0), 10.0)
    assert abs(np.linalg.det(J)) == pytest.approx(1.0, abs=1e-8)


def test_base_map_rejects_bad_matrices():
    with pytest.raises(ValueError):
        BaseMap(((2, 0), (0, 1)))
    with pytest.raises(ValueError):
        BaseMap(((1, 1), (0, 1)))
    with pytest.raises(ValueError):
        BaseMap(kappa=-1.0)


def test_roof_must_stay_positive():
    with pytest.raises(ValueError):
        RoofFunction(0.1, (((1, 0), 0.2, 0.0),))


def test_unstable_direction_is_the_eigenvector():
    base = BaseMap()
    v = bundle_directions(base, np.array([[0.3, 0.4]]), "unstable")[0]
    lam = (3 + math.sqrt(5)) / 2
    expected = np.array([1.0, lam - 2.0])
    expected /= np.linalg.norm(expected)
    np.testing.assert_allclose(np.abs(v), expected, atol=1e-10)


def test_sampling_is_seeded_and_uniform_in_volume():
    flow = cat_suspension(roof_terms=(((1, 0), 0.1, 0.0),))
    a = sample_volume(flow, 11, 20_000)
    b = sample_volume(flow, 11, 20_000)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.acceptance == pytest.approx(1 / 1.1, abs=0.01)
    assert np.all(a.s < flow.roof(a.x))


def test_observable_mean_weights_by_roof():
    flow = cat_suspension(roof_terms=(((1, 0), 0.5, 0.0),))
    u = Observable.cosine(1.0)
    # int cos(2 pi x1) (1 + 0.5 cos(2 pi x1)) / int r = 0.25
    assert flow.chi(u) == pytest.approx(0.25, abs=1e-14)
    assert flow.chi(Observable.constant(2.0)) == 2.0


def test_sup_norm_bounds_the_observable():
    u = Observable(0.1, (((1, 0), 0.5, 0.2, 0), ((1, 1), 0.3, 0.0, 0)))
    g = np.linspace(0, 1, 301)
    X = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    assert np.max(np.abs(u(X))) <= u.sup_norm + 1e-12


def test_constant_integral_is_exact(cat):
    c = Observable.constant(0.7)
    assert integrate_observable(cat, c, FlowPoint((0.1, 0.2), 0.3), 12.5) == pytest.approx(0.7 * 12.5, rel=1e-13)


def test_metric_is_continuous_across_the_roof():
    base = BaseMap(kappa=0.05)
    x = np.array([[0.17, 0.41]])
    w = np.array([[0.6, 0.8]])
    mw = metric_weights(base, x, w)
    assert metric_log_norm(mw, 0.0)[0] == pytest.approx(0.0, abs=1e-14)
    assert metric_log_norm(mw, 1.0)[0] == pytest.approx(math.log(np.linalg.norm(base.jacobian(x[0]) @ w[0])), abs=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_wrap_lands_in_unit_interval(a, b):
    y = wrap(np.array([a, b]))
    assert np.all((y >= 0) & (y < 1))


@settings(max_examples=40, deadline=None)
@given(unit, unit, st.floats(0, 0.99), st.floats(0, 7), st.floats(0, 7))
def test_flow_composes(x1, x2, s, t1, t2):
    flow = cat_suspension(kappa=0.05, roof_terms=(((0, 1), 0.2, 0.3),))
    x = np.array([x1, x2])
    s = s * flow.roof(x)
    p = PointSet(x[None], np.array([s]))
    one = evolve_points(flow, p, t1 + t2)
    two = evolve_points(flow, evolve_points(flow, p, t1), t2)
    d = np.abs(one.x - two.x)
    assert np.all(np.minimum(d, 1 - d) < 1e-7)
    assert abs(one.s[0] - two.s[0]) < 1e-7 or abs(abs(one.s[0] - two.s[0]) - flow.roof(one.x)[0]) < 1e-7


@settings(max_examples=40, deadline=None)
@given(unit, unit)
def test_base_map_inverse_round_trip(x1, x2):
    base = BaseMap(kappa=0.05)
    x = np.array([x1, x2])
    y = base.inverse(base(x))
    d = np.abs(y - x)
    assert np.all(np.minimum(d, 1 - d) < 1e-12)

