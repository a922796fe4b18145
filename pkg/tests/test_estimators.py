import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from heisenmra.estimators import DirichletDomain, HaarMRA, MinimaxCenter, SelfSimilarTile, check_points
from heisenmra.heisenberg import Model, convert, mul
from heisenmra.isometry import FiniteGroupAction


@pytest.fixture(scope="module")
def tile_est():
    return SelfSimilarTile(res=32).fit()


def test_check_points():
    with pytest.raises(ValueError):
        check_points(np.zeros((3, 2)))
    assert check_points([[0, 0, 0]]).dtype == float


def test_params_roundtrip():
    est = SelfSimilarTile(t=0.5, res=48, seed="box")
    assert est.get_params()["res"] == 48
    assert clone(est).get_params() == est.get_params()


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        SelfSimilarTile().predict(np.zeros((1, 3)))


def test_bad_seed_kind():
    with pytest.raises(ValueError):
        SelfSimilarTile(res=32, seed="ball").fit()


def test_tile_reduces_points(tile_est):
    X = np.random.default_rng(0).uniform(-3, 3, (500, 3))
    gam = tile_est.predict(X)
    R = tile_est.transform(X)
    assert np.all(tile_est.contains(R))
    np.testing.assert_allclose(mul(gam.astype(float), R), X, atol=1e-12)
    assert tile_est.score(X) >= 0.99
    assert tile_est.measure_ == pytest.approx(1.0, abs=0.02)


def test_dirichlet_estimator():
    est = DirichletDomain(res=32).fit()
    assert est.measure_ == pytest.approx(1.0, abs=0.02)
    X = np.random.default_rng(1).uniform(0, 1, (300, 3))
    assert est.score(X) >= 0.98


def test_haar_mra_fits_piecewise_constant(tile_est):
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (4000, 3))
    model = HaarMRA(level=1, tile=tile_est.domain_).fit(X, np.ones(len(X)))
    np.testing.assert_allclose(model.predict(X), 1.0, atol=1e-8)
    assert model.transform(X[:5]).shape == (5, 3)


def test_haar_mra_refines(tile_est):
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (6000, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 2]
    errs = []
    for j in (0, 1, 2):
        m = HaarMRA(level=j, tile=tile_est.domain_).fit(X, y)
        errs.append(np.mean((m.predict(X) - y) ** 2))
    assert errs[0] > errs[1] > errs[2]


def test_haar_mra_length_mismatch(tile_est):
    with pytest.raises(ValueError):
        HaarMRA(tile=tile_est.domain_).fit(np.zeros((3, 3)), np.zeros(2))


def test_minimax_center_of_rotation_orbit():
    H = FiniteGroupAction.cyclic_rotations(4)
    p = np.array([0.1, 0.05, 0.02])
    orbit_sym = np.stack([e.apply_array(p) for e in H.elements])
    orbit = convert(orbit_sym, Model.SYMMETRIC, Model.POLARIZED)
    est = MinimaxCenter().fit(orbit)
    np.testing.assert_allclose(est.center_[:2], 0, atol=1e-5)
    assert est.transform(orbit).shape == (4, 1)
    assert est.radius_ == pytest.approx(est.transform(orbit).max(), rel=1e-9)
