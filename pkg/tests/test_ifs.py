import numpy as np
import pytest

from heisenmra.heisenberg import LatticePoint, inv, mul
from heisenmra.ifs import (
    IfsSystem,
    attractor_fixed_point,
    box_seed,
    build_ifs,
    chaos_game,
    cube_seed,
    lattice_hits,
    multiplicity,
    point_seed,
    tile_grid,
    tile_measure,
    verify_self_similarity,
    verify_tiling,
)
from heisenmra.metrics import ConvergenceError

from .conftest import cached_tile


def test_maps_are_exact_similitudes(ifs_half):
    r = ifs_half.contraction_ratios()
    assert r["cc"][0] == pytest.approx(0.5, abs=1e-9) and r["cc"][1] == pytest.approx(0.5, abs=1e-9)
    assert r["contraction"][1] <= 0.5 + 1e-9


def test_apply_inverse(ifs_half):
    pts = np.random.default_rng(0).uniform(-1, 1, (10, 3))
    for i in range(len(ifs_half)):
        np.testing.assert_allclose(ifs_half.apply_inverse(i, ifs_half.apply(i, pts)), pts, atol=1e-12)


def test_invariant_box_oracle(ifs_half):
    lo, hi = ifs_half.invariant_box()
    np.testing.assert_allclose(lo, [0, 0, 0], atol=1e-9)
    np.testing.assert_allclose(hi, [1, 1, 4 / 3], atol=1e-9)


def test_invariant_box_is_invariant(ifs_half):
    lo, hi = ifs_half.invariant_box()
    pts = np.random.default_rng(1).uniform(lo, hi, (2000, 3))
    for i in range(len(ifs_half)):
        img = ifs_half.apply(i, pts)
        assert np.all(img >= lo - 1e-9) and np.all(img <= hi + 1e-9)


@pytest.mark.parametrize("t", [0.0, 0.6, 1.0])
def test_bad_parameters(t):
    with pytest.raises(ValueError):
        IfsSystem(t, [LatticePoint(0, 0, 0)])


def test_bad_transversal_rejected():
    with pytest.raises(ValueError):
        IfsSystem(0.5, [])


def test_chaos_game_stays_in_box(ifs_half):
    lo, hi = ifs_half.invariant_box()
    pts = chaos_game(ifs_half, 500, seed=2)
    assert np.all(pts >= lo - 1e-9) and np.all(pts <= hi + 1e-9)


@pytest.mark.parametrize("res", [32, 64])
def test_cube_seed_converges_to_unit_measure(res):
    out = cached_tile(res)
    assert out.converged and out.iterations <= 12
    assert out.measure == pytest.approx(1.0, abs=0.02)
    assert tile_measure(out.voxels) == out.measure


def test_symdiff_decreases():
    h = cached_tile(32, "box").symdiff_history
    assert all(a >= b for a, b in zip(h, h[1:]))
    assert h[-1] <= (1 / 32) ** 3


def test_attractor_in_invariant_box(ifs_half, tile32):
    lo, hi = ifs_half.invariant_box()
    blo, bhi = tile32.bounding_box()
    h = tile32.spacing
    assert np.all(blo >= lo - h) and np.all(bhi <= hi + h)


def test_hutchinson_fixed_point(ifs_half, tile32):
    again = attractor_fixed_point(ifs_half, tile32, max_iter=1, strict=False)
    assert again.voxels.symdiff_measure(tile32) <= tile32.cell_volume


def test_max_iter_zero_returns_seed(ifs_half):
    grid = tile_grid(ifs_half, 32)
    seed = cube_seed(grid)
    out = attractor_fixed_point(ifs_half, seed, max_iter=0, strict=False)
    assert np.array_equal(out.voxels.occupancy, seed.occupancy)


def test_strict_raises_when_not_converged(ifs_half):
    grid = tile_grid(ifs_half, 32)
    with pytest.raises(ConvergenceError):
        attractor_fixed_point(ifs_half, box_seed(grid, *ifs_half.invariant_box()), max_iter=2)


def test_empty_seed_rejected(ifs_half):
    grid = tile_grid(ifs_half, 32)
    with pytest.raises(ValueError):
        attractor_fixed_point(ifs_half, grid, max_iter=3)


def test_single_voxel_seed_forward(ifs_half):
    grid = tile_grid(ifs_half, 32)
    out = attractor_fixed_point(ifs_half, point_seed(grid), max_iter=12, method="forward", strict=False)
    assert out.voxels.count > 1


def test_self_similarity_small(ifs_half, tile64):
    assert verify_self_similarity(ifs_half, tile64, samples=100_000) < 0.05


def test_self_similarity_fails_for_cube(ifs_half):
    grid = tile_grid(ifs_half, 32)
    assert verify_self_similarity(ifs_half, cube_seed(grid), samples=100_000) > 0.1


def test_lattice_hits_exact(tile32):
    pts = np.random.default_rng(3).uniform(-2, 3, (3000, 3))
    rows, gams = lattice_hits(tile32, pts)
    for r, g in zip(rows[:200], gams[:200]):
        assert tile32.contains(mul(inv(g.astype(float)), pts[r])[None])[0]
    # brute force on a sub-sample
    sub = pts[:100]
    mult = multiplicity(tile32, sub)
    brute = np.zeros(len(sub), int)
    for m in range(-6, 7):
        for n in range(-6, 7):
            for k in range(-12, 14):
                ginv = np.array([-m, -n, -k + m * n], float)
                brute += tile32.contains(mul(ginv, sub))
    np.testing.assert_array_equal(mult, brute)


def test_tiling(tile64):
    rep = verify_tiling(tile64, samples=50_000)
    assert rep.fraction_one >= 0.99
    assert rep.mean == pytest.approx(1.0, abs=0.01)


def test_tiling_range_guard(tile32):
    with pytest.raises(ValueError):
        verify_tiling(tile32, window=((5, 5, 5), (6, 6, 6)), lattice_range=2, samples=100)


def test_discrete_tile_is_exact_pullback_fixed_point(ifs_half, tile32):
    # on lattice-aligned grids c is in Q iff some F_i^{-1}(c) is in Q
    X = tile32.centers().reshape(-1, 3)
    hit = np.zeros(len(X), bool)
    for i in range(len(ifs_half)):
        hit |= tile32.contains(ifs_half.apply_inverse(i, X))
    np.testing.assert_array_equal(hit, tile32.contains(X))


def test_build_ifs_rejects_non_transversal():
    reps = [[a, b, c] for c in range(4) for b in range(2) for a in range(2)]
    reps[-1] = [1, 1, 1]  # duplicates the coset of (1, 1, 1)
    with pytest.raises(ValueError):
        build_ifs(0.5, reps)
    reps[-1] = [-1, 1, 3]
    assert len(build_ifs(0.5, reps)) == 16
