import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heisenmra.ifs import cube_seed, tile_grid
from heisenmra.mra import (
    LevelBasis,
    ScalingFunction,
    box_indicator,
    build_wavelet_bank,
    gaussian,
    gram_riesz_bounds,
    haar_matrix,
    mra_diagnostics,
    overlap_table,
    parseval_residual,
    project_onto_level,
    two_scale_residual,
    window_grid,
    write_coefficients_csv,
)
from heisenmra.voxels import VoxelSet


@pytest.fixture(scope="module")
def cube32(ifs_half):
    return cube_seed(tile_grid(ifs_half, 32))


@pytest.mark.parametrize("n", [1, 2, 4, 8, 3, 5])
def test_haar_matrix_orthogonal(n):
    H = haar_matrix(n)
    np.testing.assert_allclose(H @ H.T, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(H[0], np.full(n, 1 / np.sqrt(n)))


def test_haar_matrix_invalid():
    with pytest.raises(ValueError):
        haar_matrix(0)


def test_wavelet_bank_shape_and_orthogonality():
    bank = build_wavelet_bank(2)
    assert bank.matrix.shape == (16, 16)
    assert bank.orthogonality_residual() <= 1e-12
    np.testing.assert_allclose(bank.matrix[0], 0.25)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=16, max_size=16))
def test_parseval_property(values):
    bank = build_wavelet_bank(2)
    v = np.array(values)
    assert parseval_residual(bank, v, 1 / 16) <= 1e-10 * max(1.0, np.sum(v ** 2))
    np.testing.assert_allclose(bank.synthesize(bank.analyze(v)), v, atol=1e-10)


def test_scaling_function(tile32):
    phi = ScalingFunction(tile32)
    assert phi.norm_sq == pytest.approx(1.0, abs=0.02)
    assert phi(np.array([[0.25, 0.25, 0.1]])).shape == (1,)
    with pytest.raises(ValueError):
        ScalingFunction(VoxelSet.empty_box((0, 0, 0), (1, 1, 1), 4))


def test_two_scale_tile_vs_cube(ifs_half, tile64, cube32):
    assert two_scale_residual(ifs_half, tile64, samples=100_000) < 0.05
    assert two_scale_residual(ifs_half, cube32, samples=100_000) > 0.1


def test_two_scale_norm(ifs_half, tile64):
    _, norm = two_scale_residual(ifs_half, tile64, samples=200_000, return_norm=True)
    assert norm == pytest.approx(16 * tile64.measure(), rel=0.03)


def test_overlap_table_tile_is_diagonal(tile32):
    table = overlap_table(tile32, samples=20_000)
    assert table[(0, 0, 0)] == pytest.approx(tile32.measure())
    assert sum(v for k, v in table.items() if k != (0, 0, 0)) == 0


def test_gram_orthonormal_for_tile(tile32):
    rep = gram_riesz_bounds(tile32, 1, samples=20_000)
    assert rep.offdiag_mass == 0
    assert rep.alpha1 == pytest.approx(rep.alpha2)


def test_gram_guard(tile32):
    with pytest.raises(ValueError):
        gram_riesz_bounds(tile32, 0)


def test_window_grid_lattice_nodes():
    X, dV = window_grid(((0, 0, 0), (1, 1, 1)), 8, lattice_h=1 / 64)
    assert dV == pytest.approx((8 / 64) ** 3)
    np.testing.assert_allclose(X * 8, np.round(X * 8), atol=1e-9)
    X2, dV2 = window_grid(((0, 0, 0), (1, 1, 1)), 4)
    assert len(X2) == 64 and dV2 == pytest.approx(1 / 64)


def test_projection_of_generator_is_exact(tile32):
    f = ScalingFunction(tile32)
    lo, hi = tile32.bounding_box()
    for j in (0, 1):
        p = project_onto_level(f, j, tile32, (lo - 0.25, hi + 0.25), 32)
        assert p.l2_error <= 1e-9
    assert p.coefficient_of((0, 0, 0)) == pytest.approx(1.0)


def test_projection_errors_decrease(tile32):
    f = gaussian()
    errs = [project_onto_level(f, j, tile32, ((-0.1,) * 3, (1.1,) * 3), 32).l2_error for j in (0, 1, 2)]
    assert errs[0] > errs[1] > errs[2]


def test_projection_gram_mode(tile32):
    with pytest.raises(ValueError):
        project_onto_level(gaussian(), 0, tile32, ((0,) * 3, (1,) * 3), 16, gram="bogus")


def test_level_basis_evaluate(tile32):
    basis = LevelBasis(tile32, 1)
    X = np.random.default_rng(0).uniform(0, 1, (200, 3))
    rows, cols, gammas = basis.incidence(X)
    vals = basis.evaluate(gammas, np.ones(len(gammas)), X)
    np.testing.assert_array_equal(vals, np.bincount(rows, minlength=len(X)))


def test_coefficient_csv(tmp_path, tile32):
    p = project_onto_level(box_indicator(), 0, tile32, ((0,) * 3, (1,) * 3), 16)
    path = tmp_path / "nested" / "c.csv"
    write_coefficients_csv(path, [p])
    raw = path.read_bytes()
    assert raw.startswith(b"level,gamma_m,gamma_n,gamma_k,coefficient\r\n")
    rows = list(csv.reader(raw.decode().splitlines()))
    assert len(rows) == 1 + len(p.gammas)


@pytest.mark.slow
def test_diagnostics_tile_vs_cube(ifs_half, tile64, cube32):
    good = mra_diagnostics(ifs_half, tile64)
    assert good.passed, good.to_dict()
    bad = mra_diagnostics(ifs_half, cube32)
    checks = bad.checks()
    assert not bad.passed and not checks["refinement"] and not checks["nesting"]
    assert bad.to_dict()["verdict"] == "fail"


def test_diagnostics_requires_levels(ifs_half, tile32):
    with pytest.raises(ValueError):
        mra_diagnostics(ifs_half, tile32, levels=())
