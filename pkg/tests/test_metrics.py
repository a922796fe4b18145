import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heisenmra.heisenberg import GroupPoint, dilate_array, mul
from heisenmra.metrics import (
    ControlPath,
    ConvergenceError,
    cc_distance_shoot,
    cc_distance_upper,
    cc_norm,
    contraction_distance,
    contraction_distance_shoot,
    contraction_norm,
    distance,
    distance_array,
    estimate_constant,
    geodesic_endpoint,
    integrate_path,
    shoot,
)

unit = arrays(float, 3, elements=st.floats(-1, 1, allow_nan=False))


@pytest.mark.parametrize("q, expected", [
    ((1, 0, 0), 1.0),
    ((0, 1, 0), 1.0),
    ((-2, 0, 0), 2.0),
    ((0, 0, 1), math.sqrt(4 * math.pi)),
    ((0, 0, 0.25), math.sqrt(math.pi)),
])
def test_cc_oracles(q, expected):
    assert cc_distance_shoot(np.zeros(3), np.array(q, float)) == pytest.approx(expected, abs=1e-9)
    assert cc_norm(np.array(q, float)) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("z", [0.1, 1.0, 3.0, 6.0])
def test_contraction_vertical_oracle(z):
    # below 2 pi the straight vertical segment is optimal
    assert contraction_norm(np.array([0, 0, z])) == pytest.approx(z, abs=1e-12)
    assert contraction_distance_shoot(np.zeros(3), np.array([0, 0, z])) == pytest.approx(z, abs=1e-9)


def test_contraction_vertical_past_two_pi():
    z = 10.0
    assert contraction_norm(np.array([0, 0, z])) == pytest.approx(2 * math.sqrt(math.pi * (z - math.pi)))


def test_shoot_converges_on_horizontal_target():
    with np.errstate(all="raise"):
        res = shoot(np.zeros(3), np.array([1.0, 0.0, 0.0]), "contraction")
    assert not res.fallback and res.length == pytest.approx(1.0, abs=1e-12)


def test_shoot_covector_reaches_target():
    q = np.array([0.4, -0.3, 0.2])
    res = shoot(np.zeros(3), q, "cc")
    from heisenmra.heisenberg import to_symmetric

    np.testing.assert_allclose(geodesic_endpoint(res.covector, res.length, "cc"), to_symmetric(q), atol=1e-9)


@pytest.mark.parametrize("metric", ["cc", "contraction"])
def test_shoot_matches_oracle(metric):
    rng = np.random.default_rng(5)
    for _ in range(3):
        p, q = rng.uniform(0, 1, (2, 3))
        ref = cc_distance_upper(p, q, 24) if metric == "cc" else contraction_distance(p, q, 24)
        assert shoot(p, q, metric).length == pytest.approx(ref, rel=0.01)


def test_oracle_is_upper_bound():
    rng = np.random.default_rng(8)
    p, q = rng.uniform(0, 1, (2, 3))
    assert cc_distance_upper(p, q, 24) >= cc_distance_shoot(p, q) * (1 - 1e-9)


def test_distance_dispatch_and_errors():
    p, q = np.zeros(3), np.array([0.3, 0.1, 0.2])
    assert distance(p, q, "cc") == pytest.approx(float(cc_norm(q)))
    with pytest.raises(ValueError):
        distance(p, q, "euclid")
    with pytest.raises(ValueError):
        distance(p, q, "cc", solver="magic")


def test_integrate_path_length():
    path = ControlPath(GroupPoint(0, 0, 0), np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0.5, 0.5]))
    end, length = integrate_path(path)
    assert length == pytest.approx(1.0)
    np.testing.assert_allclose(end.to_array(), [0.5, 0.5, 0.25])


@settings(max_examples=40)
@given(unit, unit)
def test_symmetry(p, q):
    for metric in ("cc", "contraction"):
        assert distance_array(p, q, metric) == pytest.approx(distance_array(q, p, metric), rel=1e-9, abs=1e-7)


@settings(max_examples=40)
@given(unit, unit, unit)
def test_triangle_inequality(p, q, r):
    for metric in ("cc", "contraction"):
        d = lambda a, b: float(distance_array(a, b, metric))  # noqa: E731
        assert d(p, r) <= d(p, q) + d(q, r) + 1e-9


@settings(max_examples=40)
@given(unit, unit, unit)
def test_left_invariance(g, p, q):
    for metric in ("cc", "contraction"):
        assert distance_array(mul(g, p), mul(g, q), metric) == pytest.approx(
            distance_array(p, q, metric), rel=1e-9, abs=1e-7)


@settings(max_examples=40)
@given(unit, unit, st.floats(0.1, 3))
def test_cc_homogeneity(p, q, t):
    assert distance_array(dilate_array(t, p), dilate_array(t, q), "cc") == pytest.approx(
        t * distance_array(p, q, "cc"), rel=1e-9, abs=1e-7)  # d ~ sqrt|dz| amplifies roundoff near p = q


@settings(max_examples=40)
@given(unit, unit)
def test_contraction_below_cc(p, q):
    assert distance_array(p, q, "contraction") <= distance_array(p, q, "cc") * (1 + 1e-12) + 1e-15


def test_estimate_constant_report():
    rep = estimate_constant(samples=200, seed=1)
    assert rep.violations == 0 and rep.contraction_exceeds_cc == 0
    # vertical pairs have ratio sqrt(4 pi), horizontal ones at most 1 / sqrt(d_R)
    assert 1 <= rep.c_fit <= math.sqrt(4 * math.pi) + 1e-9
    assert rep.to_dict()["samples"] == 200


def test_estimate_constant_needs_samples():
    with pytest.raises(ValueError):
        estimate_constant(samples=10)


def test_convergence_error_is_runtime_error():
    assert issubclass(ConvergenceError, RuntimeError)
    assert GroupPoint(0, 0, 0).model.value == "polarized"
