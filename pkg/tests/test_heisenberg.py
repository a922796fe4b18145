import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heisenmra.heisenberg import (
    GroupPoint,
    LatticePoint,
    Model,
    ModelMismatchError,
    algebra_check,
    cometric,
    commutator_flow_endpoint,
    commutator_flow_residual,
    convert,
    convert_model,
    dilate,
    dilate_array,
    frame_fields,
    generic_commutator_residual,
    group_inv,
    group_mul,
    hormander_rank,
    horizontal_rank,
    inv,
    left_invariant_frame,
    mul,
)

coords = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
points = arrays(float, 3, elements=coords)
models = st.sampled_from(list(Model))


# -- frozen oracles ---------------------------------------------------------

def test_polarized_product_oracle():
    np.testing.assert_array_equal(mul([1, 2, 3], [4, 5, 6]), [5, 7, 3 + 6 + 1 * 5])


def test_symmetric_product_oracle():
    np.testing.assert_allclose(mul([1, 2, 3], [4, 5, 6], Model.SYMMETRIC), [5, 7, 9 + 0.5 * (5 - 8)])


@pytest.mark.parametrize("p, expected", [
    ((1.0, 2.0, 3.0), (1.0, 2.0, 2.0)),
    ((0.5, 0.5, 0.5), (0.5, 0.5, 0.375)),
    ((0.0, 4.0, 1.0), (0.0, 4.0, 1.0)),
])
def test_conversion_oracle(p, expected):
    np.testing.assert_allclose(convert(p, Model.POLARIZED, Model.SYMMETRIC), expected)


def test_polarized_inverse_oracle():
    np.testing.assert_array_equal(inv([2.0, 3.0, 1.0]), [-2.0, -3.0, 5.0])


def test_lattice_product_matches_float_product():
    a, b = LatticePoint(1, -2, 3), LatticePoint(-4, 5, 7)
    np.testing.assert_array_equal((a * b).to_array(), mul(a.to_array(), b.to_array()))
    assert a * a.inverse() == LatticePoint(0, 0, 0)


def test_frame_columns():
    F = left_invariant_frame(GroupPoint(0.3, -0.7, 2.0))
    np.testing.assert_allclose(F, [[1, 0, 0], [0, 1, 0], [0, 0.3, 1]])


@pytest.mark.parametrize("model", list(Model))
def test_cometric_rank_two(model):
    assert horizontal_rank(GroupPoint(0.2, 0.4, -1.0, model)) == 2
    assert np.allclose(cometric(GroupPoint(0, 0, 0, model)), np.diag([1, 1, 0]))


# -- invariants as properties ------------------------------------------------

@given(points, points, points, models)
def test_associativity(p, q, r, model):
    np.testing.assert_allclose(mul(mul(p, q, model), r, model), mul(p, mul(q, r, model), model),
                               atol=1e-12)


@given(points, models)
def test_inverse(p, model):
    np.testing.assert_allclose(mul(p, inv(p, model), model), 0, atol=1e-12)
    np.testing.assert_allclose(mul(inv(p, model), p, model), 0, atol=1e-12)


@given(points, points, st.floats(0.05, 4), models)
def test_dilation_is_automorphism(p, q, t, model):
    np.testing.assert_allclose(dilate_array(t, mul(p, q, model)),
                               mul(dilate_array(t, p), dilate_array(t, q), model), atol=1e-10)


@given(points, points)
def test_conversion_is_homomorphism(p, q):
    lhs = convert(mul(p, q), Model.POLARIZED, Model.SYMMETRIC)
    rhs = mul(convert(p, Model.POLARIZED, Model.SYMMETRIC), convert(q, Model.POLARIZED, Model.SYMMETRIC),
              Model.SYMMETRIC)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@given(points)
def test_conversion_roundtrip(p):
    back = convert(convert(p, Model.POLARIZED, Model.SYMMETRIC), Model.SYMMETRIC, Model.POLARIZED)
    np.testing.assert_allclose(back, p, atol=1e-12)


@given(points, models)
def test_frame_is_left_invariant(p, model):
    # d(L_p) at the identity maps the frame there to the frame at p
    eps = 1e-6
    D = np.stack([(mul(p, e, model) - mul(p, -e, model)) / (2 * eps) for e in np.eye(3) * eps], axis=-1)
    np.testing.assert_allclose(D @ left_invariant_frame(GroupPoint.identity(model)),
                               left_invariant_frame(GroupPoint.from_array(p, model)), atol=1e-6)


# -- GroupPoint API -----------------------------------------------------------

def test_mixed_models_raise():
    with pytest.raises(ModelMismatchError):
        group_mul(GroupPoint(1, 0, 0), GroupPoint(0, 1, 0, Model.SYMMETRIC))


def test_group_point_roundtrip():
    p = GroupPoint(0.5, -1.0, 2.0)
    q = convert_model(p, Model.SYMMETRIC)
    assert q.model is Model.SYMMETRIC
    np.testing.assert_allclose(convert_model(q, Model.POLARIZED).to_array(), p.to_array())
    np.testing.assert_allclose((p * group_inv(p)).to_array(), 0)
    np.testing.assert_allclose(dilate(2.0, p).to_array(), [1.0, -2.0, 8.0])


# -- brackets and flows -------------------------------------------------------

@pytest.mark.parametrize("model", list(Model))
def test_hormander(model):
    assert hormander_rank(GroupPoint(0.3, -0.2, 1.0, model)) == 3


@pytest.mark.parametrize("t", [0.2, 0.1, 0.05])
def test_commutator_exact(t):
    np.testing.assert_allclose(commutator_flow_endpoint(t), [0, 0, t * t], atol=1e-15)
    assert np.abs(commutator_flow_residual(t)).max() <= 1e-15


def test_commutating_pair_has_zero_loop():
    assert np.abs(commutator_flow_residual(0.3, horizontal=False)).max() <= 1e-15


def test_commutator_rejects_large_t():
    with pytest.raises(ValueError):
        commutator_flow_residual(1.5)


def test_generic_fields_third_order():
    X1, X2, _ = frame_fields()
    Y = lambda p: X2(p) + np.array([0.0, p[0] ** 2, 0.0])  # noqa: E731
    ts = np.array([0.2, 0.1, 0.05])
    res = [generic_commutator_residual(t, X1, Y) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(res), 1)[0]
    assert slope >= 2.9


def test_algebra_check_small():
    out = algebra_check(2000, seed=3)
    assert out["samples"] == 2000
    assert max(v for k, v in out.items() if k != "samples") < 1e-12
