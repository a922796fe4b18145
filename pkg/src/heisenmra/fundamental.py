"""Dirichlet cells of the integer lattice and checks of the fundamental-set axioms.

The lattice Z^3 acts by left translation in the polarized model.  A Dirichlet
cell around a base point p0 keeps the points closer to p0 than to any other
orbit point gamma * p0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .heisenberg import GroupPoint, LatticePoint, Model, inv, mul
from .metrics import _check_metric, contraction_norm, cc_norm
from .voxels import VoxelSet

log = logging.getLogger(__name__)

SAFETY_BOUND = 8.0
MIN_CELLS = 32


def _norm(g, metric):
    return cc_norm(g) if metric == "cc" else contraction_norm(g)


def _base_array(p0) -> np.ndarray:
    if isinstance(p0, GroupPoint):
        return p0.as_model(Model.POLARIZED).to_array()
    return np.asarray(p0, dtype=float).reshape(3)


def vertical_bound(length: float, metric: str) -> float:
    """Largest |z| (symmetric model) reachable from the identity by a curve of given length.

    Horizontally the symmetric z-coordinate is the signed area between the planar
    projection and its chord, at most L^2 / (2 pi).  The contraction metric may
    also move vertically, at unit cost.
    """
    area = length * length / (2 * np.pi)
    return area if metric == "cc" else area + length


def enumeration_box(p0, eps: float, metric: str = "cc") -> dict:
    """Integer ranges provably containing every gamma with d(p0, gamma p0) < eps.

    Writing g = p0^-1 gamma p0, the planar part of g is (m, n) and its symmetric
    vertical part is k - m n / 2 + b m - a n with p0 = (a, b, .).  Lengths bound
    |m|, |n| <= eps and the vertical part by :func:`vertical_bound`.
    """
    a, b, _ = _base_array(p0)
    r = int(math.floor(eps))
    return {"m": (-r, r), "n": (-r, r), "vertical": vertical_bound(eps, metric), "center": (a, b)}


def enumerate_orbit_images(p0, eps: float, metric: str = "cc",
                           safety_bound: float = SAFETY_BOUND) -> list[tuple[LatticePoint, float]]:
    """All nontrivial lattice elements gamma with d(p0, gamma * p0) < eps, sorted by distance."""
    _check_metric(metric)
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps > safety_bound:
        raise ValueError(f"eps={eps} exceeds the safety bound {safety_bound}")
    box = enumeration_box(p0, eps, metric)
    a, b = box["center"]
    V = box["vertical"]
    cands = []
    for m in range(box["m"][0], box["m"][1] + 1):
        for n in range(box["n"][0], box["n"][1] + 1):
            shift = -m * n / 2 + b * m - a * n
            for k in range(math.ceil(-V - shift), math.floor(V - shift) + 1):
                if (m, n, k) != (0, 0, 0):
                    cands.append((m, n, k))
    if not cands:
        return []
    G = np.array(cands, dtype=float)
    p = _base_array(p0)
    d = _norm(mul(inv(p), mul(G, p)), metric)
    keep = np.flatnonzero(d < eps)
    keep = keep[np.lexsort((G[keep, 2], G[keep, 1], G[keep, 0], d[keep]))]
    return [(LatticePoint(*map(int, G[i])), float(d[i])) for i in keep]


@dataclass
class DirichletSpec:
    base_point: GroupPoint = field(default_factory=lambda: GroupPoint(0.5, 0.5, 0.5))
    metric: str = "contraction"
    enumeration_radius: float | None = None
    trivial: bool = False

    def __post_init__(self):
        _check_metric(self.metric)
        if not isinstance(self.base_point, GroupPoint):
            self.base_point = GroupPoint.from_array(self.base_point)
        if self.enumeration_radius is not None and not self.enumeration_radius > 0:
            raise ValueError("enumeration_radius must be positive")


def dirichlet_grid(spec: DirichletSpec, res: int = 64, half_width=(1.0, 1.0, 1.25)) -> VoxelSet:
    """Lattice-aligned grid of ``res`` cells per unit length centred on the base point."""
    p = _base_array(spec.base_point)
    hw = np.asarray(half_width, float)
    return VoxelSet.lattice_grid(p - hw, p + hw, res, margin=0)


def dirichlet_cell(spec: DirichletSpec, grid: VoxelSet, tie_tol: float = 1e-9) -> VoxelSet:
    """Voxel Dirichlet cell: centres q with d(q, p0) <= d(q, gamma p0) for all gamma.

    Orbit points farther than twice the largest d(q, p0) over the grid cannot
    win, so the enumeration radius is that bound.  Only cells with
    d(q, p0) > d(p0, gamma p0) / 2 are tested against gamma, and a planar lower
    bound skips most exact evaluations.  Numerical ties (within ``tie_tol``,
    relative) stay in the cell.
    """
    if min(grid.shape) < MIN_CELLS:
        raise ValueError(f"grid too coarse: need at least {MIN_CELLS} cells per axis")
    p = _base_array(spec.base_point)
    if not grid.contains(p[None])[0] and not np.all((p >= grid.lo) & (p <= grid.hi)):
        raise ValueError("grid box does not contain the base point")
    if spec.trivial:
        return grid.with_occupancy(np.ones(grid.shape, bool))

    q = grid.centers().reshape(-1, 3)
    d0 = _norm(mul(inv(p), q), spec.metric)
    eps = spec.enumeration_radius or 2 * float(d0.max()) * (1 + 1e-9)
    images = enumerate_orbit_images(p, eps, spec.metric, safety_bound=max(SAFETY_BOUND, eps))
    log.info("dirichlet: %d orbit images within %.3f", len(images), eps)
    inside = np.ones(len(q), bool)
    for gamma, dg in images:
        gp = mul(gamma.to_array(), p)
        # triangle inequality: gamma p0 can only win where d(q, p0) > dg / 2
        cand = inside & (d0 > 0.5 * dg)
        # planar displacement never exceeds length in either metric
        planar = np.maximum(np.abs(q[:, 0] - gp[0]), np.abs(q[:, 1] - gp[1]))
        cand &= planar < d0
        idx = np.flatnonzero(cand)
        if len(idx) == 0:
            continue
        dg_q = _norm(mul(inv(gp), q[idx]), spec.metric)
        lose = dg_q < d0[idx] * (1 - tie_tol)
        inside[idx[lose]] = False
    out = grid.with_occupancy(inside.reshape(grid.shape))
    out.meta.update(base_point=p.tolist(), metric=spec.metric, enumeration_radius=eps,
                    orbit_images=len(images))
    return out


# ---------------------------------------------------------------------------
# fundamental-set verification
# ---------------------------------------------------------------------------

@dataclass
class FundamentalReport:
    closure_defect: float
    covering: float
    overlap: float
    measure: float
    samples: int
    thresholds: dict = field(default_factory=lambda: {"closure": 0.05, "covering": 0.99, "overlap": 0.01})

    @property
    def passed(self) -> bool:
        th = self.thresholds
        return (self.closure_defect <= th["closure"] and self.covering >= th["covering"]
                and self.overlap <= th["overlap"])

    def failures(self) -> list[str]:
        th = self.thresholds
        out = []
        if self.closure_defect > th["closure"]:
            out.append("a")
        if self.covering < th["covering"]:
            out.append("b")
        if self.overlap > th["overlap"]:
            out.append("c")
        return out

    def to_dict(self) -> dict:
        return {"closure_defect": self.closure_defect, "covering": self.covering, "overlap": self.overlap,
                "measure": self.measure, "samples": self.samples, "thresholds": self.thresholds,
                "passed": self.passed, "failed_axioms": self.failures()}


def verify_fundamental_set(F: VoxelSet, window=((0, 0, 0), (1, 1, 1)), lattice_range: int = 4,
                           samples: int = 200_000, seed: int = 0) -> FundamentalReport:
    """Report on (a) F = closure of interior, (b) covering, (c) disjoint interiors.

    (a) is the relative measure of F minus its morphological opening.  (b) and
    (c) use uniform random points of the window and the exact multiplicity of
    lattice translates of F.
    """
    from .ifs import multiplicity

    if F.count == 0:
        raise ValueError("F must be nonempty")
    opened = F.erode(1).dilate(1)
    closure_defect = np.count_nonzero(F.occupancy ^ opened.occupancy) / F.count
    pts = np.random.default_rng(seed).uniform(*window, (samples, 3))
    mult = multiplicity(F, pts, lattice_range)
    return FundamentalReport(
        closure_defect=float(closure_defect),
        covering=float(np.mean(mult >= 1)),
        overlap=float(np.mean(mult >= 2)),
        measure=F.measure(),
        samples=samples,
    )


def fixed_point_free(gamma: LatticePoint) -> bool:
    """Left translation by gamma has no fixed point unless gamma is the identity."""
    return tuple(gamma) != (0, 0, 0)
