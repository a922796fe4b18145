"""Self-similar tiles as attractors of the contraction family F_i = delta_t o L_{gamma_i}.

The attractor is computed by deterministic set iteration on voxel grids.  The
default *pull-back* step marks a cell centre ``c`` when ``F_i^{-1}(c)`` lies in
the current set for some ``i``.  On grids whose centres sit on (1/res) Z^3 the
maps ``F_i^{-1}`` send centres to centres, so each step is exact.  The
*forward* step maps occupied centres through every ``F_i`` and dilates by one
cell, which keeps an outer approximation and works for point-like seeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .heisenberg import LatticePoint, dilate_array, inv, mul
from .isometry import coset_representatives, decompose_lattice
from .metrics import ConvergenceError, cc_norm, distance_array
from .voxels import VoxelSet, gauge_hausdorff

log = logging.getLogger(__name__)


@dataclass
class IfsSystem:
    t: float
    reps: list[LatticePoint]

    def __post_init__(self):
        s = 1.0 / self.t if self.t > 0 else 0.0
        if not (0 < self.t < 1) or abs(s - round(s)) > 1e-9:
            raise ValueError(f"1/t must be an integer >= 2, got t={self.t!r}")
        if not self.reps:
            raise ValueError("an IFS needs at least one map")

    @property
    def s(self) -> int:
        return int(round(1.0 / self.t))

    @property
    def gammas(self) -> np.ndarray:
        return np.array([g.to_array() for g in self.reps])

    def __len__(self) -> int:
        return len(self.reps)

    def apply(self, i: int, pts) -> np.ndarray:
        """F_i applied to polarized points."""
        return dilate_array(self.t, mul(self.reps[i].to_array(), pts))

    def apply_inverse(self, i: int, pts) -> np.ndarray:
        return mul(inv(self.reps[i].to_array()), dilate_array(self.s, pts))

    def contraction_ratios(self, samples: int = 64, seed: int = 0) -> dict:
        """Worst sampled ratios d(F_i p, F_i q) / d(p, q) per metric."""
        rng = np.random.default_rng(seed)
        P = rng.uniform(-1, 1, (samples, 3))
        Q = rng.uniform(-1, 1, (samples, 3))
        out = {}
        for metric in ("cc", "contraction"):
            base = distance_array(P, Q, metric)
            ratios = [distance_array(self.apply(i, P), self.apply(i, Q), metric) / base
                      for i in range(len(self))]
            r = np.concatenate(ratios)
            out[metric] = (float(r.min()), float(r.max()))
        return out

    def invariant_box(self, tol: float = 1e-12, max_iter: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
        """Smallest box reached by interval iteration of the Hutchinson operator.

        Starts from the a-priori CC ball of radius t/(1-t) * max |gamma_i|,
        which every F_i maps into itself, so every iterate contains the attractor.
        """
        R = self.t / (1 - self.t) * float(cc_norm(self.gammas).max())
        zr = R * R / (4 * np.pi) + R * R / 2
        lo, hi = np.array([-R, -R, -zr]), np.array([R, R, zr])
        log.debug("a-priori attractor box radius %.4f", R)
        g = self.gammas
        for _ in range(max_iter):
            # products m*y over the box, per map
            my = np.stack([g[:, 0] * lo[1], g[:, 0] * hi[1]], axis=1)
            nlo = np.stack([self.t * (g[:, 0] + lo[0]), self.t * (g[:, 1] + lo[1]),
                            self.t ** 2 * (g[:, 2] + lo[2] + my.min(1))], axis=1).min(0)
            nhi = np.stack([self.t * (g[:, 0] + hi[0]), self.t * (g[:, 1] + hi[1]),
                            self.t ** 2 * (g[:, 2] + hi[2] + my.max(1))], axis=1).max(0)
            done = np.all(np.abs(nlo - lo) < tol) and np.all(np.abs(nhi - hi) < tol)
            lo, hi = nlo, nhi
            if done:
                break
        return lo, hi


def build_ifs(t: float = 0.5, reps=None, verify: bool = True, samples: int = 64, seed: int = 0) -> IfsSystem:
    """Assemble F_i = delta_t o L_{gamma_i} over a transversal (canonical by default)."""
    reps = coset_representatives(t) if reps is None else [LatticePoint(*map(int, r)) for r in reps]
    sys = IfsSystem(float(t), reps)
    classes = {decompose_lattice(g, sys.s)[0] for g in reps}
    if len(reps) != sys.s ** 4 or len(classes) != len(reps):
        raise ValueError(f"reps must be a transversal of {sys.s ** 4} distinct cosets")
    if verify:
        ratios = sys.contraction_ratios(samples, seed)
        lo, hi = ratios["cc"]
        if abs(lo - t) > 1e-6 or abs(hi - t) > 1e-6:
            raise ValueError(f"CC contraction ratios {ratios['cc']} differ from t={t}")
        if ratios["contraction"][1] > t + 1e-6:
            raise ValueError(f"contraction-metric ratio {ratios['contraction'][1]} exceeds t={t}")
    return sys


# ---------------------------------------------------------------------------
# attractor
# ---------------------------------------------------------------------------

@dataclass
class TileResult:
    voxels: VoxelSet
    iterations: int
    final_symdiff: float
    measure: float
    converged: bool = True
    tol: float = 0.0
    method: str = "pullback"
    symdiff_history: list[float] = field(default_factory=list)
    hausdorff_history: list[float] = field(default_factory=list)
    decay_ratio: float | None = None

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_symdiff": self.final_symdiff,
            "measure": self.measure,
            "converged": self.converged,
            "tol": self.tol,
            "method": self.method,
            "symdiff_history": list(self.symdiff_history),
            "hausdorff_history": list(self.hausdorff_history),
            "decay_ratio": self.decay_ratio,
            "shape": list(self.voxels.shape),
            "box": [self.voxels.lo.tolist(), self.voxels.hi.tolist()],
        }


def tile_grid(sys: IfsSystem, res: int = 128, margin: int = 3) -> VoxelSet:
    """Empty lattice-aligned grid covering the invariant box of ``sys``."""
    lo, hi = sys.invariant_box()
    return VoxelSet.lattice_grid(lo, hi, res, margin)


def cube_seed(grid: VoxelSet) -> VoxelSet:
    return VoxelSet.from_predicate(grid, lambda p: np.all((p >= 0) & (p < 1), axis=-1))


def box_seed(grid: VoxelSet, lo, hi) -> VoxelSet:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return VoxelSet.from_predicate(grid, lambda p: np.all((p >= lo) & (p <= hi), axis=-1))


def point_seed(grid: VoxelSet, point=(0.0, 0.0, 0.0)) -> VoxelSet:
    idx, ok = grid.index(np.asarray(point, float))
    if not ok:
        raise ValueError("seed point outside grid")
    occ = np.zeros(grid.shape, bool)
    occ[tuple(idx)] = True
    return grid.with_occupancy(occ)


def _pullback_tables(sys: IfsSystem, grid: VoxelSet):
    """Per-map index tables for F_i^{-1} on cell centres, separable by axis.

    x' = s x - m and y' = s y - n depend on one axis each; z' = s^2 z - k + m n - m s y
    depends on (y, z).
    """
    ax, ay, az = grid.axes()
    s = sys.s
    tables = []
    for m, n, k in sys.gammas:
        ix = np.floor((s * ax - m - grid.lo[0]) / grid.spacing[0] + 1e-9).astype(np.int64)
        iy = np.floor((s * ay - n - grid.lo[1]) / grid.spacing[1] + 1e-9).astype(np.int64)
        zz = s * s * az[None, :] - k + m * n - m * s * ay[:, None]
        iz = np.floor((zz - grid.lo[2]) / grid.spacing[2] + 1e-9).astype(np.int64)
        okx = (ix >= 0) & (ix < grid.shape[0])
        oky = (iy >= 0) & (iy < grid.shape[1])
        okz = (iz >= 0) & (iz < grid.shape[2]) & oky[:, None]
        tables.append((np.flatnonzero(okx), ix[okx], iy.clip(0, grid.shape[1] - 1),
                       iz.clip(0, grid.shape[2] - 1), okz))
    return tables


def _pullback_step(Q: np.ndarray, tables) -> np.ndarray:
    out = np.zeros_like(Q)
    for dst, ix, iy, iz, okz in tables:
        vals = Q[ix[:, None, None], iy[None, :, None], iz[None, :, :]] & okz[None]
        out[dst] |= vals
    return out


def _forward_step(sys: IfsSystem, vs: VoxelSet) -> np.ndarray:
    pts = vs.centers(vs.occupancy)
    out = np.zeros(vs.shape, bool)
    for i in range(len(sys)):
        idx, ok = vs.index(sys.apply(i, pts))
        if not ok.all():
            raise ValueError("iterate escaped the grid box; enlarge the margin")
        out[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return vs.with_occupancy(out).dilate(1).occupancy


def _fit_decay(hist: list[float], floor: float) -> float | None:
    h = np.asarray(hist, float)
    keep = h >= floor
    if keep.sum() < 2:
        keep = h > 0
    if keep.sum() < 2:
        return None
    it = np.flatnonzero(keep)
    slope = np.polyfit(it, np.log(h[keep]), 1)[0]
    return float(np.exp(slope))


def attractor_fixed_point(sys: IfsSystem, seed: VoxelSet, max_iter: int = 12, tol: float | None = None,
                          method: str = "pullback", track_hausdorff: bool = True,
                          strict: bool = True) -> TileResult:
    """Iterate T(Q) = U_i F_i(Q) from ``seed`` until measure(T(Q) sym-diff Q) <= tol.

    ``tol`` defaults to one cell volume.  The geometric decay ratio is fitted to
    the gauge Hausdorff distance between successive iterates, using the steps
    whose distance still exceeds eight cells.
    """
    if seed.count == 0:
        raise ValueError("seed must be nonempty")
    if method not in ("pullback", "forward"):
        raise ValueError(f"unknown method {method!r}")
    lo, hi = sys.invariant_box()
    if np.any(lo < seed.lo - 1e-12) or np.any(hi > seed.hi + 1e-12):
        raise ValueError("grid box does not contain the attractor's invariant box")
    tol = seed.cell_volume if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")

    Q = seed
    sd_hist: list[float] = []
    h_hist: list[float] = []
    tables = _pullback_tables(sys, seed) if method == "pullback" else None
    converged = False
    for _ in range(max_iter):
        occ = _pullback_step(Q.occupancy, tables) if tables is not None else _forward_step(sys, Q)
        new = Q.with_occupancy(occ)
        if new.count == 0:
            raise ValueError("iterate became empty; seed too small for pull-back iteration")
        sd_hist.append(new.symdiff_measure(Q))
        if track_hausdorff:
            h_hist.append(gauge_hausdorff(new, Q))
        Q = new
        log.info("iteration %d: symdiff %.3e", len(sd_hist), sd_hist[-1])
        if sd_hist[-1] <= tol:
            converged = True
            break
    if max_iter > 0 and not converged and strict:
        raise ConvergenceError(f"attractor iteration did not converge in {max_iter} steps "
                               f"(last symdiff {sd_hist[-1]:.3e})")
    res = TileResult(
        voxels=Q,
        iterations=len(sd_hist),
        final_symdiff=sd_hist[-1] if sd_hist else 0.0,
        measure=Q.measure(),
        converged=converged,
        tol=tol,
        method=method,
        symdiff_history=sd_hist,
        hausdorff_history=h_hist,
        decay_ratio=_fit_decay(h_hist, 8 * float(seed.spacing[:2].max())) if h_hist else None,
    )
    Q.meta.update(t=sys.t, iterations=res.iterations)
    return res


def tile_measure(Q: VoxelSet) -> float:
    return Q.measure()


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def _sample_box(lo, hi, samples: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(lo, hi, (samples, 3))


def verify_self_similarity(sys: IfsSystem, Q: VoxelSet, samples: int = 400_000, seed: int = 0) -> float:
    """measure(A(Q) sym-diff U_i L_{gamma_i}(Q)) / measure(A(Q)), A = delta_{1/t}.

    Estimated on uniform random points over the bounding box of A(Q) and the union.
    """
    if Q.count == 0:
        raise ValueError("Q must be nonempty")
    blo, bhi = Q.bounding_box()
    s = sys.s
    corners = np.array([[x, y, z] for x in (blo[0], bhi[0]) for y in (blo[1], bhi[1])
                        for z in (blo[2], bhi[2])])
    big = np.concatenate([dilate_array(s, corners)]
                         + [mul(g, corners) for g in sys.gammas])
    # shear term m*y can move z beyond the image of the corners' hull
    lo = big.min(0) - [0, 0, abs(sys.gammas[:, 0]).max() * np.abs([blo[1], bhi[1]]).max()]
    hi = big.max(0) + [0, 0, abs(sys.gammas[:, 0]).max() * np.abs([blo[1], bhi[1]]).max()]
    pts = _sample_box(lo, hi, samples, seed)
    a = Q.contains(dilate_array(sys.t, pts))
    b = np.zeros(len(pts), bool)
    for g in sys.gammas:
        b |= Q.contains(mul(inv(g), pts))
    if not a.any():
        raise ValueError("no sample fell in A(Q)")
    return float(np.count_nonzero(a ^ b) / np.count_nonzero(a))


def lattice_hits(Q: VoxelSet, pts, lattice_range: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All pairs (row, gamma) with gamma^{-1} x_row in Q, gamma in Z^3.

    Candidates are enumerated exactly from the bounding box of Q.  With
    ``lattice_range`` every contributing gamma must satisfy max|.| <= range.
    """
    pts = np.asarray(pts, float)
    if Q.count == 0 or len(pts) == 0:
        return np.zeros(0, np.int64), np.zeros((0, 3), np.int64)
    blo, bhi = Q.bounding_box()
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    widths = np.ceil(bhi - blo).astype(int) + 1
    m0 = np.ceil(x - bhi[0]).astype(np.int64)
    n0 = np.ceil(y - bhi[1]).astype(np.int64)
    rows, gams = [], []
    for dm in range(widths[0]):
        m = m0 + dm
        for dn in range(widths[1]):
            n = n0 + dn
            # gamma^{-1} x has z-coordinate z - k + m n - m y
            k0 = np.ceil(z + m * n - m * y - bhi[2]).astype(np.int64)
            for dk in range(widths[2]):
                g = np.stack([m, n, k0 + dk], axis=1)
                hit = np.flatnonzero(Q.contains(mul(inv(g.astype(float)), pts)))
                rows.append(hit)
                gams.append(g[hit])
    rows = np.concatenate(rows)
    gams = np.concatenate(gams)
    if lattice_range is not None and len(gams) and np.abs(gams).max() > lattice_range:
        raise ValueError("window needs lattice elements beyond lattice_range")
    return rows, gams


def multiplicity(Q: VoxelSet, pts, lattice_range: int | None = None) -> np.ndarray:
    """Number of lattice elements gamma with gamma^{-1} x in Q, for each point x."""
    rows, _ = lattice_hits(Q, pts, lattice_range)
    return np.bincount(rows, minlength=len(pts))


@dataclass
class TilingReport:
    histogram: dict
    mean: float
    fraction_one: float
    samples: int

    def to_dict(self) -> dict:
        return {"histogram": {str(k): v for k, v in self.histogram.items()}, "mean": self.mean,
                "fraction_one": self.fraction_one, "samples": self.samples}


def verify_tiling(Q: VoxelSet, window=((0, 0, 0), (1, 1, 1)), lattice_range: int = 4,
                  samples: int = 200_000, seed: int = 0) -> TilingReport:
    """Multiplicity histogram of lattice translates of Q over random window points."""
    pts = _sample_box(*window, samples, seed)
    mult = multiplicity(Q, pts, lattice_range)
    vals, counts = np.unique(mult, return_counts=True)
    return TilingReport(
        histogram={int(v): int(c) for v, c in zip(vals, counts)},
        mean=float(mult.mean()),
        fraction_one=float(np.mean(mult == 1)),
        samples=samples,
    )


def chaos_game(sys: IfsSystem, points: int = 10_000, seed: int = 0, burn_in: int = 20) -> np.ndarray:
    """Random-iteration sample of the attractor (for plotting only)."""
    rng = np.random.default_rng(seed)
    p = np.zeros((points, 3))
    for _ in range(burn_in):
        choice = rng.integers(len(sys), size=points)
        g = sys.gammas[choice]
        p = dilate_array(sys.t, mul(g, p))
    return p
