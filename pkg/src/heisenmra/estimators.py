"""scikit-learn style wrappers around the tile, Dirichlet and MRA machinery.

Points are ``(n_samples, 3)`` arrays in the polarized model.  ``fit`` builds
the underlying set (the ``X`` argument is accepted for pipeline compatibility
and ignored where no data is needed).
"""

from __future__ import annotations

import numpy as np
from scipy import optimize, sparse
from scipy.sparse.linalg import lsqr
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fundamental import DirichletSpec, dirichlet_cell, dirichlet_grid
from .heisenberg import GroupPoint, dilate_array, inv, mul
from .ifs import attractor_fixed_point, box_seed, build_ifs, cube_seed, lattice_hits, tile_grid
from .metrics import distance_array
from .mra import _key
from .voxels import VoxelSet


def check_points(X) -> np.ndarray:
    """Validate an ``(n, 3)`` float array of group points."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 coordinates per point, got {X.shape[1]}")
    return X


def _first_translate(Q: VoxelSet, X: np.ndarray) -> np.ndarray:
    """For each point, the lattice element gamma with x in gamma Q (lexicographically first)."""
    rows, gams = lattice_hits(Q, X)
    out = np.full((len(X), 3), np.iinfo(np.int64).min, dtype=np.int64)
    order = np.lexsort((gams[:, 2], gams[:, 1], gams[:, 0], rows))
    r, g = rows[order], gams[order]
    _, first = np.unique(r, return_index=True)
    out[r[first]] = g[first]
    return out


class _LatticeReducer(TransformerMixin, BaseEstimator):
    """Shared predict/transform for estimators that hold a fundamental set ``domain_``."""

    def predict(self, X) -> np.ndarray:
        """Lattice element (m, n, k) whose translate of the domain contains each point."""
        check_is_fitted(self, "domain_")
        gam = _first_translate(self.domain_, check_points(X))
        if np.any(gam[:, 0] == np.iinfo(np.int64).min):
            raise ValueError("some points are not covered by any translate of the domain")
        return gam

    def transform(self, X) -> np.ndarray:
        """Representative gamma^{-1} x of each point inside the domain."""
        X = check_points(X)
        return mul(inv(self.predict(X).astype(float)), X)

    def contains(self, X) -> np.ndarray:
        check_is_fitted(self, "domain_")
        return self.domain_.contains(check_points(X))

    def score(self, X, y=None) -> float:
        """Fraction of points covered exactly once by lattice translates."""
        from .ifs import multiplicity

        check_is_fitted(self, "domain_")
        return float(np.mean(multiplicity(self.domain_, check_points(X)) == 1))


class SelfSimilarTile(_LatticeReducer):
    """Attractor of delta_t o L_gamma over the canonical coset transversal."""

    def __init__(self, t=0.5, res=64, seed="cube", max_iter=12, track_hausdorff=False):
        self.t = t
        self.res = res
        self.seed = seed
        self.max_iter = max_iter
        self.track_hausdorff = track_hausdorff

    def fit(self, X=None, y=None):
        if self.seed not in ("cube", "box"):
            raise ValueError("seed must be 'cube' or 'box'")
        self.system_ = build_ifs(self.t)
        grid = tile_grid(self.system_, int(self.res))
        seed = cube_seed(grid) if self.seed == "cube" else box_seed(grid, *self.system_.invariant_box())
        self.result_ = attractor_fixed_point(self.system_, seed, self.max_iter,
                                             track_hausdorff=self.track_hausdorff)
        self.domain_ = self.result_.voxels
        self.measure_ = self.result_.measure
        return self


class DirichletDomain(_LatticeReducer):
    """Voxel Dirichlet cell of the integer lattice around ``base_point``."""

    def __init__(self, base_point=(0.5, 0.5, 0.5), metric="contraction", res=32,
                 half_width=(1.0, 1.0, 1.25)):
        self.base_point = base_point
        self.metric = metric
        self.res = res
        self.half_width = half_width

    def fit(self, X=None, y=None):
        self.spec_ = DirichletSpec(GroupPoint.from_array(self.base_point), self.metric)
        self.domain_ = dirichlet_cell(self.spec_, dirichlet_grid(self.spec_, int(self.res), self.half_width))
        self.measure_ = self.domain_.measure()
        return self


class HaarMRA(RegressorMixin, BaseEstimator):
    """Least-squares fit of samples by an element of V_j generated by a tile.

    ``fit(X, y)`` projects the samples ``y`` at points ``X`` onto the level-j
    Haar space; ``predict`` evaluates the expansion and ``transform`` returns
    the level-j piece index of each point.
    """

    def __init__(self, level=0, tile=None, t=0.5, res=64):
        self.level = level
        self.tile = tile
        self.t = t
        self.res = res

    def _domain(self) -> VoxelSet:
        if self.tile is not None:
            return self.tile
        return SelfSimilarTile(self.t, self.res).fit().domain_

    def _pieces(self, X):
        Y = dilate_array((1.0 / self.t) ** self.level, X)
        return lattice_hits(self.domain_, Y)

    def fit(self, X, y):
        X = check_points(X)
        y = np.asarray(y, float).ravel()
        if len(y) != len(X):
            raise ValueError("X and y have different lengths")
        self.domain_ = self._domain()
        rows, gams = self._pieces(X)
        self.gammas_, cols = np.unique(gams, axis=0, return_inverse=True)
        Phi = sparse.csr_matrix((np.ones(len(rows)), (rows, cols.ravel())), shape=(len(X), len(self.gammas_)))
        self.coef_ = lsqr(Phi, y, atol=1e-12, btol=1e-12)[0]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = check_points(X)
        rows, gams = self._pieces(X)
        keys = _key(self.gammas_)  # np.unique sorted them lexicographically
        want = _key(gams)
        pos = np.minimum(np.searchsorted(keys, want), len(keys) - 1)
        ok = keys[pos] == want
        out = np.zeros(len(X))
        np.add.at(out, rows[ok], self.coef_[pos[ok]])
        return out

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "domain_")
        X = check_points(X)
        return _first_translate(self.domain_, dilate_array((1.0 / self.t) ** self.level, X))


class MinimaxCenter(BaseEstimator):
    """Point minimising the largest distance to a finite point set.

    For the orbit of a finite isometry group this centre is a common fixed point.
    """

    def __init__(self, metric="contraction", tol=1e-12):
        self.metric = metric
        self.tol = tol

    def fit(self, X, y=None):
        X = check_points(X)

        def spread(x):
            return float(distance_array(x[None], X, self.metric).max())

        x0 = X.mean(axis=0)
        res = optimize.minimize(spread, x0, method="Nelder-Mead",
                                options={"xatol": self.tol, "fatol": self.tol, "maxiter": 20000,
                                         "initial_simplex": x0 + np.vstack([np.zeros(3), 0.05 * np.eye(3)])})
        self.center_ = res.x
        self.radius_ = spread(res.x)
        return self

    def transform(self, X) -> np.ndarray:
        """Distances from each point to the fitted centre."""
        check_is_fitted(self, "center_")
        return distance_array(self.center_[None], check_points(X), self.metric)[:, None]
