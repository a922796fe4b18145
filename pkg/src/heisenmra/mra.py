"""Haar multiresolution analysis generated by the indicator of a self-similar tile.

Level ``j`` is spanned by ``phi_{j,gamma}(x) = chi_Q(gamma^{-1} delta_{s^j} x)``
with ``s = 1/t`` and gamma in Z^3, so larger ``j`` means finer pieces
``delta_{t^j}(gamma Q)``.  Inner products between basis functions are exact
rescalings of the level-0 overlaps ``G0(delta) = measure(Q cap delta Q)``:

    <phi_{j,gamma}, phi_{j,gamma'}> = t^{4j} G0(gamma^{-1} gamma').

Functions are sampled at the midpoints of a regular grid over a window that
contains their support; right-hand sides are midpoint-rule integrals.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import helmert
from scipy.sparse.linalg import spsolve

from .heisenberg import dilate_array, inv, mul
from .ifs import IfsSystem, lattice_hits
from .voxels import VoxelSet

log = logging.getLogger(__name__)

Function = Callable[[np.ndarray], np.ndarray]


@dataclass
class ScalingFunction:
    Q: VoxelSet

    def __post_init__(self):
        if self.Q.count == 0:
            raise ValueError("the generating set must have positive measure")

    @property
    def norm_sq(self) -> float:
        return self.Q.measure()

    def __call__(self, pts) -> np.ndarray:
        return self.Q.contains(pts).astype(float)


# ---------------------------------------------------------------------------
# two-scale relation
# ---------------------------------------------------------------------------

def two_scale_residual(sys: IfsSystem, Q: VoxelSet, samples: int = 400_000, seed: int = 0,
                       return_norm: bool = False):
    """Relative L2 defect of chi_Q(delta_t x) = sum_i chi_Q(gamma_i^{-1} x).

    Monte Carlo over a box containing A(Q) and every gamma_i Q.  With
    ``return_norm`` also returns the estimate of ||chi_Q o A^{-1}||^2, which
    should equal s^4 measure(Q).
    """
    if Q.count == 0:
        raise ValueError("Q must be nonempty")
    blo, bhi = Q.bounding_box()
    s = sys.s
    corners = np.array([[a, b, c] for a in (blo[0], bhi[0]) for b in (blo[1], bhi[1]) for c in (blo[2], bhi[2])])
    imgs = np.concatenate([dilate_array(s, corners)] + [mul(g, corners) for g in sys.gammas])
    shear = np.abs(sys.gammas[:, 0]).max() * np.abs([blo[1], bhi[1]]).max()
    lo = imgs.min(0) - [0, 0, shear]
    hi = imgs.max(0) + [0, 0, shear]
    pts = np.random.default_rng(seed).uniform(lo, hi, (samples, 3))
    vol = float(np.prod(hi - lo))
    a = Q.contains(dilate_array(sys.t, pts)).astype(float)
    b = np.zeros(samples)
    for g in sys.gammas:
        b += Q.contains(mul(inv(g), pts))
    if not a.any():
        raise ValueError("no sample fell in A(Q)")
    res = float(np.sum((a - b) ** 2) / np.sum(a ** 2))
    if return_norm:
        return res, vol * float(a.mean())
    return res


# ---------------------------------------------------------------------------
# Gram matrices
# ---------------------------------------------------------------------------

def _key(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, np.int64) + (1 << 20)
    return (g[..., 0] << 42) | (g[..., 1] << 21) | g[..., 2]


def overlap_table(Q: VoxelSet, samples: int = 200_000, seed: int = 0) -> dict[tuple, float]:
    """Nonzero overlaps G0(delta) = measure(Q cap delta Q) for lattice delta.

    The diagonal is exact; off-diagonal entries are Monte Carlo estimates from
    uniform points of Q.
    """
    rng = np.random.default_rng(seed)
    cells = np.argwhere(Q.occupancy)
    pick = cells[rng.integers(len(cells), size=samples)]
    pts = Q.lo + (pick + rng.random((samples, 3))) * Q.spacing
    rows, gams = lattice_hits(Q, pts)
    mu = Q.measure()
    table = {(0, 0, 0): mu}
    if len(gams):
        keys, inverse, counts = np.unique(gams, axis=0, return_inverse=True, return_counts=True)
        for g, c in zip(keys, counts):
            t = tuple(int(v) for v in g)
            if t != (0, 0, 0):
                # x in Q and x in gamma Q: measure(Q cap gamma Q)
                table[t] = mu * c / samples
    return table


@dataclass
class GramReport:
    matrix: np.ndarray
    alpha1: float
    alpha2: float
    gammas: np.ndarray = field(repr=False, default=None)

    @property
    def offdiag_mass(self) -> float:
        G = self.matrix
        return float((np.abs(G).sum() - np.abs(np.diag(G)).sum()) / np.trace(G))

    def to_dict(self) -> dict:
        return {"alpha1": self.alpha1, "alpha2": self.alpha2, "offdiag_mass": self.offdiag_mass,
                "size": int(self.matrix.shape[0])}


def _gram_from_table(gammas: np.ndarray, table: dict, scale: float = 1.0) -> sparse.csr_matrix:
    keys = _key(gammas)
    order = np.argsort(keys)
    skeys = keys[order]
    rows, cols, vals = [], [], []
    for delta, v in table.items():
        # gamma_b = gamma_a * delta
        tgt = _key(mul(gammas.astype(float), np.array(delta, float)).round().astype(np.int64))
        pos = np.searchsorted(skeys, tgt)
        pos = np.minimum(pos, len(skeys) - 1)
        ok = skeys[pos] == tgt
        rows.append(np.flatnonzero(ok))
        cols.append(order[pos[ok]])
        vals.append(np.full(ok.sum(), v * scale))
    n = len(gammas)
    G = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    G = G.tocsr()
    return 0.5 * (G + G.T)


def gram_riesz_bounds(Q: VoxelSet, lattice_range: int = 2, samples: int = 200_000, seed: int = 0) -> GramReport:
    """Gram matrix of the translates chi_Q(gamma^{-1} x) over the cube |gamma| <= range."""
    if lattice_range < 1:
        raise ValueError("lattice_range must be at least 1")
    r = np.arange(-lattice_range, lattice_range + 1)
    gammas = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    G = _gram_from_table(gammas, overlap_table(Q, samples, seed)).toarray()
    ev = np.linalg.eigvalsh(G)
    return GramReport(G, float(ev[0]), float(ev[-1]), gammas)


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

@dataclass
class Projection:
    level: int
    gammas: np.ndarray
    coefficients: np.ndarray
    l2_error: float
    norm: float
    f_norm: float

    def coefficient_of(self, gamma) -> float:
        k = _key(np.asarray(gamma))
        hit = np.flatnonzero(_key(self.gammas) == k)
        return float(self.coefficients[hit[0]]) if len(hit) else 0.0


def window_grid(window, points_per_axis, lattice_h: float | None = None) -> tuple[np.ndarray, float]:
    """Quadrature nodes over ``window`` and the volume each one carries.

    Without ``lattice_h`` these are the midpoints of a regular grid.  With it the
    nodes are the multiples of ``q * lattice_h`` inside the window (q a positive
    integer per axis), so that integer translations and dilations keep nodes on
    the lattice of voxel centres.
    """
    lo, hi = (np.asarray(b, float) for b in window)
    n = np.broadcast_to(np.asarray(points_per_axis, int), 3)
    if lattice_h is None:
        axes = [lo[i] + (np.arange(n[i]) + 0.5) * (hi[i] - lo[i]) / n[i] for i in range(3)]
        step = (hi - lo) / n
    else:
        q = np.maximum(1, np.round((hi - lo) / n / lattice_h)).astype(int)
        step = q * lattice_h
        axes = [np.arange(np.ceil(lo[i] / step[i] - 1e-9), np.floor(hi[i] / step[i] + 1e-9) + 1) * step[i]
                for i in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    return X, float(np.prod(step))


def _nodes(Q: VoxelSet, window, points_per_axis):
    res = Q.meta.get("res")
    return window_grid(window, points_per_axis, 1.0 / res if res else None)


class LevelBasis:
    """Basis functions of V_j that meet a set of sample points."""

    def __init__(self, Q: VoxelSet, level: int, t: float = 0.5, table: dict | None = None):
        self.Q, self.level, self.t = Q, int(level), float(t)
        self.s = int(round(1 / t))
        self.table = overlap_table(Q) if table is None else table

    def incidence(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, column ids, gammas) of phi_{j,gamma}(X_row) = 1."""
        Y = dilate_array(float(self.s) ** self.level, X)
        rows, gams = lattice_hits(self.Q, Y)
        gammas, cols = np.unique(gams, axis=0, return_inverse=True)
        return rows, cols.ravel(), gammas.reshape(-1, 3)

    def gram(self, gammas: np.ndarray) -> sparse.csr_matrix:
        return _gram_from_table(gammas, self.table, self.t ** (4 * self.level))

    def evaluate(self, gammas: np.ndarray, coeffs: np.ndarray, X: np.ndarray) -> np.ndarray:
        Y = dilate_array(float(self.s) ** self.level, X)
        rows, gams = lattice_hits(self.Q, Y)
        keys = _key(gammas)
        order = np.argsort(keys)
        pos = np.minimum(np.searchsorted(keys[order], _key(gams)), len(keys) - 1)
        ok = keys[order][pos] == _key(gams)
        out = np.zeros(len(X))
        np.add.at(out, rows[ok], coeffs[order[pos[ok]]])
        return out


def project_onto_level(f: Function, j: int, Q: VoxelSet, window, points_per_axis=64, t: float = 0.5,
                       table: dict | None = None, min_alpha: float = 1e-8, gram: str = "exact") -> Projection:
    """Orthogonal projection of ``f`` onto V_j by solving the Gram system.

    ``window`` must contain the support of ``f`` (or the region where it is
    non-negligible).  The error is ||f - P_j f|| / ||f|| on the quadrature
    nodes.  ``gram="exact"`` uses the rescaled overlap table, which is right for
    norms of pieces larger than the window; ``gram="discrete"`` uses the node
    quadrature for both sides, so projections onto nested spaces compose exactly.
    """
    if gram not in ("exact", "discrete"):
        raise ValueError(f"unknown gram mode {gram!r}")
    X, dV = _nodes(Q, window, points_per_axis)
    fx = np.asarray(f(X), float)
    basis = LevelBasis(Q, j, t, table)
    rows, cols, gammas = basis.incidence(X)
    Phi = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(X), len(gammas)))
    r = Phi.T @ fx * dV
    G = (basis.gram(gammas) if gram == "exact" else (Phi.T @ Phi) * dV).tocsc()
    diag = G.diagonal()
    if diag.min() <= min_alpha * basis.t ** (4 * j):
        raise ValueError("singular Gram matrix")
    c = np.atleast_1d(spsolve(G, r))
    resid = fx - Phi @ c
    f_norm = float(np.sqrt(np.sum(fx ** 2) * dV))
    err = float(np.sqrt(np.sum(resid ** 2) * dV)) / f_norm if f_norm > 0 else 0.0
    norm = float(np.sqrt(max(c @ (G @ c), 0.0)))
    return Projection(j, gammas, c, err, norm, f_norm)


def write_coefficients_csv(path, projections: Iterable[Projection]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["level", "gamma_m", "gamma_n", "gamma_k", "coefficient"])
        for p in projections:
            order = np.lexsort((p.gammas[:, 2], p.gammas[:, 1], p.gammas[:, 0]))
            for i in order:
                m, n, k = (int(v) for v in p.gammas[i])
                w.writerow([p.level, m, n, k, repr(float(p.coefficients[i]))])


# ---------------------------------------------------------------------------
# wavelet bank
# ---------------------------------------------------------------------------

def haar_matrix(n: int) -> np.ndarray:
    """Orthogonal n x n Haar-type matrix with constant first row.

    Powers of two use the recursive Haar construction; other sizes fall back
    to the Helmert matrix.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n & (n - 1):
        return helmert(n, full=True)
    H = np.ones((1, 1))
    while H.shape[0] < n:
        m = H.shape[0]
        top = np.kron(H, [1.0, 1.0])
        bottom = np.kron(np.eye(m), [1.0, -1.0])
        H = np.vstack([top, bottom])
        H /= np.linalg.norm(H, axis=1, keepdims=True)
    return H


@dataclass
class WaveletBank:
    matrix: np.ndarray

    def analyze(self, piece_coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ piece_coeffs

    def synthesize(self, wavelet_coeffs: np.ndarray) -> np.ndarray:
        return self.matrix.T @ wavelet_coeffs

    def orthogonality_residual(self) -> float:
        W = self.matrix
        return float(np.abs(W @ W.T - np.eye(len(W))).max())


def build_wavelet_bank(s: int = 2) -> WaveletBank:
    """kron(H_s, H_s, H_{s^2}); rows indexed like the canonical coset transversal."""
    return WaveletBank(np.kron(np.kron(haar_matrix(s), haar_matrix(s)), haar_matrix(s * s)))


def parseval_residual(bank: WaveletBank, values: np.ndarray, piece_measure: float) -> float:
    """|sum of piece masses - sum of squared wavelet coefficients| for a V_1 element.

    ``values`` are the constant values on the pieces of one tile; coefficients
    are taken in the orthonormal piece basis.
    """
    ortho = np.asarray(values, float) * np.sqrt(piece_measure)
    masses = np.asarray(values, float) ** 2 * piece_measure
    w = bank.analyze(ortho)
    return float(abs(masses.sum() - np.sum(w ** 2)))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def gaussian(center=(0.5, 0.5, 0.5), sigma: float = 0.15) -> Function:
    c = np.asarray(center, float)

    def f(X):
        return np.exp(-np.sum((X - c) ** 2, axis=-1) / (2 * sigma * sigma))

    return f


def box_indicator(lo=(0, 0, 0), hi=(1, 1, 1)) -> Function:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return lambda X: np.all((X >= lo) & (X < hi), axis=-1).astype(float)


@dataclass
class ProbeFunction:
    name: str
    func: Function
    window: tuple
    points: int = 64


def default_test_functions() -> list[ProbeFunction]:
    return [ProbeFunction("gaussian", gaussian(), ((-0.1, -0.1, -0.1), (1.1, 1.1, 1.1)), 64)]


@dataclass
class MraReport:
    refinement_residual: float
    riesz: GramReport
    nesting_residual: float
    density_curve: list
    triviality_curve: list
    invariance_residual: float
    tolerances: dict = field(default_factory=lambda: {
        "refinement": 0.03, "riesz": 0.05, "offdiag": 0.02, "nesting": 0.02, "invariance": 0.05})

    @property
    def mu(self) -> float:
        return float(self.riesz.matrix[0, 0])

    def checks(self) -> dict:
        tol = self.tolerances
        dens = [e for _, e in self.density_curve]
        triv = [n for _, n in self.triviality_curve]
        mu = float(np.median(np.diag(self.riesz.matrix)))
        return {
            "refinement": self.refinement_residual <= tol["refinement"],
            "riesz": (abs(self.riesz.alpha1 / mu - 1) <= tol["riesz"]
                      and abs(self.riesz.alpha2 / mu - 1) <= tol["riesz"]),
            "offdiag": self.riesz.offdiag_mass <= tol["offdiag"],
            "nesting": self.nesting_residual <= tol["nesting"],
            "density": all(a > b for a, b in zip(dens, dens[1:])),
            "triviality": all(a > b for a, b in zip(triv, triv[1:])),
            "invariance": self.invariance_residual <= tol["invariance"],
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def to_dict(self) -> dict:
        return {
            "refinement_residual": self.refinement_residual,
            "riesz": self.riesz.to_dict(),
            "nesting_residual": self.nesting_residual,
            "density_curve": [[int(j), float(e)] for j, e in self.density_curve],
            "triviality_curve": [[int(j), float(n)] for j, n in self.triviality_curve],
            "invariance_residual": self.invariance_residual,
            "checks": self.checks(),
            "verdict": "pass" if self.passed else "fail",
        }


def nesting_residual(f: ProbeFunction, Q: VoxelSet, j: int, t: float = 0.5, table=None) -> float:
    """||P_j(P_{j+1} f) - P_j f|| / ||P_j f||, sampled on the function's window.

    Projections use the node inner product, under which nested spaces give
    P_j P_{j+1} = P_j exactly; a nonzero residual then measures non-refinability.
    """
    table = overlap_table(Q) if table is None else table
    fine = project_onto_level(f.func, j + 1, Q, f.window, f.points, t, table, gram="discrete")
    basis = LevelBasis(Q, j + 1, t, table)

    def g(X):
        return basis.evaluate(fine.gammas, fine.coefficients, X)

    coarse = project_onto_level(f.func, j, Q, f.window, f.points, t, table, gram="discrete")
    twice = project_onto_level(g, j, Q, f.window, f.points, t, table, gram="discrete")
    X, dV = _nodes(Q, f.window, f.points)
    lb = LevelBasis(Q, j, t, table)
    diff = lb.evaluate(twice.gammas, twice.coefficients, X) - lb.evaluate(coarse.gammas, coarse.coefficients, X)
    ref = lb.evaluate(coarse.gammas, coarse.coefficients, X)
    return float(np.sqrt(np.sum(diff ** 2) / np.sum(ref ** 2)))


def invariance_residual(f: ProbeFunction, Q: VoxelSet, beta=(1, 0, 0), t: float = 0.5, table=None) -> float:
    """Level-0 coefficients of x -> f(beta^{-1} x) against those of f, re-indexed by beta."""
    table = overlap_table(Q) if table is None else table
    b = np.asarray(beta, float)
    lo, hi = (np.asarray(v, float) for v in f.window)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    moved = mul(b, corners)
    wide = (np.minimum(lo, moved.min(0)), np.maximum(hi, moved.max(0)))
    pts = np.ceil((wide[1] - wide[0]) / (hi - lo) * f.points).astype(int)
    base = project_onto_level(f.func, 0, Q, wide, pts, t, table)
    shifted = project_onto_level(lambda X: f.func(mul(inv(b), X)), 0, Q, wide, pts, t, table)
    scale = np.abs(base.coefficients).max()
    worst = 0.0
    for g, c in zip(base.gammas, base.coefficients):
        if abs(c) < 1e-3 * scale:
            continue
        worst = max(worst, abs(shifted.coefficient_of(mul(b, g.astype(float)).round()) - c))
    return float(worst / scale)


def mra_diagnostics(sys: IfsSystem, Q: VoxelSet, levels: Sequence[int] = (0, 1, 2),
                    test_functions: Sequence[ProbeFunction] | None = None,
                    coarse_levels: Sequence[int] = (-1, -2, -3), seed: int = 0) -> MraReport:
    """Check the MRA axioms for the spaces generated by chi_Q."""
    levels = list(levels)
    if not levels:
        raise ValueError("levels must be nonempty")
    tests = list(test_functions) if test_functions else default_test_functions()
    table = overlap_table(Q, seed=seed)
    main = tests[0]
    density = [(j, project_onto_level(main.func, j, Q, main.window, main.points, sys.t, table).l2_error)
               for j in levels]
    unit = box_indicator()
    triv = [(j, project_onto_level(unit, j, Q, ((0, 0, 0), (1, 1, 1)), 48, sys.t, table).norm)
            for j in coarse_levels]
    blo, bhi = Q.bounding_box()
    # the generator itself is the sharpest nesting probe: it lies in V_1 iff Q is refinable
    probes = tests + [ProbeFunction("generator", ScalingFunction(Q), (blo - 0.25, bhi + 0.25), 64)]
    nest = max(nesting_residual(tf, Q, levels[0], sys.t, table) for tf in probes)
    return MraReport(
        refinement_residual=two_scale_residual(sys, Q, seed=seed),
        riesz=gram_riesz_bounds(Q, 2, seed=seed),
        nesting_residual=nest,
        density_curve=density,
        triviality_curve=triv,
        invariance_residual=invariance_residual(main, Q, t=sys.t, table=table),
    )
