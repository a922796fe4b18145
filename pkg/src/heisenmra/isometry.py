"""Isometries of the Heisenberg group, their conjugation by dilations, and fixed points.

Closed-form variants:

* :class:`LeftTranslation` ``p -> gamma * p`` (any model),
* :class:`RotationVertical` rotation by ``theta`` about the vertical line
  through ``center`` (symmetric model only, where planar rotations are
  automorphisms),
* :class:`Composition` ``parts[0] o parts[1] o ...`` (rightmost applied first).
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .heisenberg import (
    GroupPoint,
    LatticePoint,
    Model,
    ModelMismatchError,
    cometric_array,
    convert,
    dilate_array,
    inv,
    mul,
)
from .metrics import ConvergenceError, distance_array

log = logging.getLogger(__name__)


class Isometry:
    """Base class; subclasses implement ``apply_array`` on ``(..., 3)`` arrays."""

    model: Model

    def apply_array(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "Isometry":
        raise NotImplementedError

    def __call__(self, p: GroupPoint) -> GroupPoint:
        return apply_isometry(self, p)

    def __matmul__(self, other: "Isometry") -> "Composition":
        return Composition((self, other))


@dataclass(frozen=True)
class LeftTranslation(Isometry):
    gamma: GroupPoint

    @property
    def model(self) -> Model:
        return self.gamma.model

    def apply_array(self, p):
        return mul(self.gamma.to_array(), p, self.model)

    def inverse(self):
        return LeftTranslation(GroupPoint.from_array(inv(self.gamma.to_array(), self.model), self.model))

    @classmethod
    def lattice(cls, m: int, n: int, k: int) -> "LeftTranslation":
        return cls(GroupPoint(float(m), float(n), float(k), Model.POLARIZED))


@dataclass(frozen=True)
class RotationVertical(Isometry):
    center: GroupPoint
    theta: float

    def __post_init__(self):
        if self.center.model is not Model.SYMMETRIC:
            raise ModelMismatchError("vertical rotations are only exposed in the symmetric model")

    @property
    def model(self) -> Model:
        return Model.SYMMETRIC

    def apply_array(self, p):
        c = self.center.to_array()
        local = mul(inv(c, Model.SYMMETRIC), p, Model.SYMMETRIC)
        cs, sn = np.cos(self.theta), np.sin(self.theta)
        rot = np.stack([cs * local[..., 0] - sn * local[..., 1],
                        sn * local[..., 0] + cs * local[..., 1],
                        local[..., 2]], axis=-1)
        return mul(c, rot, Model.SYMMETRIC)

    def inverse(self):
        return RotationVertical(self.center, -self.theta)


@dataclass(frozen=True)
class Composition(Isometry):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("empty composition")
        models = {p.model for p in self.parts}
        if len(models) > 1:
            raise ModelMismatchError("composition mixes coordinate models")

    @property
    def model(self) -> Model:
        return self.parts[0].model

    def apply_array(self, p):
        for part in reversed(self.parts):
            p = part.apply_array(p)
        return p

    def inverse(self):
        return Composition(tuple(p.inverse() for p in reversed(self.parts)))


@dataclass(frozen=True)
class Identity(Isometry):
    model: Model = Model.POLARIZED

    def apply_array(self, p):
        return np.asarray(p, dtype=float)

    def inverse(self):
        return self


@dataclass(frozen=True)
class PointMap:
    """Arbitrary smooth map given as an array callable; used for negative controls."""

    func: Callable[[np.ndarray], np.ndarray]
    model: Model = Model.POLARIZED

    def apply_array(self, p):
        return self.func(np.asarray(p, dtype=float))


def apply_isometry(J: Isometry, p: GroupPoint) -> GroupPoint:
    if p.model is not J.model:
        raise ModelMismatchError(f"isometry acts in the {J.model.value} model, point is {p.model.value}")
    return GroupPoint.from_array(J.apply_array(p.to_array()), p.model)


def numerical_jacobian(f: Callable, p: np.ndarray, step: float = 1e-6) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    cols = [(f(p + e) - f(p - e)) / (2 * step) for e in np.eye(3) * step]
    return np.stack(cols, axis=-1)


@dataclass
class IsometryCheck:
    passed: bool
    max_residual: float

    def __bool__(self):
        return self.passed


def check_infinitesimal_isometry(J, samples: int = 20, tol: float = 1e-6, seed: int = 0,
                                 box=((-1, -1, -1), (1, 1, 1))) -> IsometryCheck:
    """Test dPsi g dPsi^T = g(Psi p) with numerical Jacobians at random points."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(*box, size=(samples, 3))
    worst = 0.0
    for p in pts:
        D = numerical_jacobian(J.apply_array, p)
        lhs = D @ cometric_array(p, J.model) @ D.T
        rhs = cometric_array(J.apply_array(p), J.model)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return IsometryCheck(worst <= tol, worst)


def preserves_distance(J, samples: int = 50, seed: int = 0, metric: str = "cc",
                       box=((-1, -1, -1), (1, 1, 1))) -> float:
    """Largest relative change of sampled pair distances under ``J``."""
    rng = np.random.default_rng(seed)
    P = rng.uniform(*box, size=(samples, 3))
    Q = rng.uniform(*box, size=(samples, 3))
    to_pol = lambda a: convert(a, J.model, Model.POLARIZED)  # noqa: E731
    d0 = distance_array(to_pol(P), to_pol(Q), metric)
    d1 = distance_array(to_pol(J.apply_array(P)), to_pol(J.apply_array(Q)), metric)
    return float(np.max(np.abs(d1 - d0) / d0))


# ---------------------------------------------------------------------------
# dilations
# ---------------------------------------------------------------------------

def conjugate_isometry(t: float, J: Isometry) -> Isometry:
    """a(J) = A o J o A^-1 with A = dilation by 1/t (so A^-1 = dilation by t)."""
    if not t > 0:
        raise ValueError("dilation parameter must be positive")
    s = 1.0 / t
    if isinstance(J, LeftTranslation):
        return LeftTranslation(GroupPoint.from_array(dilate_array(s, J.gamma.to_array()), J.model))
    if isinstance(J, RotationVertical):
        # planar rotations commute with dilations
        return RotationVertical(GroupPoint.from_array(dilate_array(s, J.center.to_array()),
                                                      Model.SYMMETRIC), J.theta)
    if isinstance(J, Composition):
        return Composition(tuple(conjugate_isometry(t, p) for p in J.parts))
    if isinstance(J, Identity):
        return J
    raise TypeError(f"cannot conjugate {type(J).__name__}")


def coset_representatives(t: float) -> list[LatticePoint]:
    """Canonical transversal of K / a(K) for K = Z^3 and a = conjugation by dilation 1/t.

    Every lattice element factors uniquely as ``rep * a(g)`` and as ``a(g) * rep``.
    """
    s = 1.0 / t if t > 0 else 0.0
    si = int(round(s))
    if not t > 0 or si < 1 or abs(s - si) > 1e-9:
        raise ValueError(f"1/t must be a positive integer, got t={t!r}")
    return [LatticePoint(a, b, c) for a in range(si) for b in range(si) for c in range(si * si)]


def decompose_lattice(g: LatticePoint, s: int, side: str = "left") -> tuple[LatticePoint, LatticePoint]:
    """Split ``g`` as ``rep * delta_s(h)`` (side='left') or ``delta_s(h) * rep`` (side='right')."""
    m, n, k = g
    e1, e2 = m % s, n % s
    mh, nh = (m - e1) // s, (n - e2) // s
    if side == "left":
        rest = k - e1 * s * nh
    else:
        rest = k - s * mh * e2
    e3 = rest % (s * s)
    kh = (rest - e3) // (s * s)
    return LatticePoint(e1, e2, e3), LatticePoint(mh, nh, kh)


def dilate_lattice(s: int, g: LatticePoint) -> LatticePoint:
    return LatticePoint(s * g.m, s * g.n, s * s * g.k)


# ---------------------------------------------------------------------------
# finite groups and fixed points
# ---------------------------------------------------------------------------

def _probe_points(model: Model, count: int = 6, seed: int = 12345) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1, 1, (count, 3))


class FiniteGroupAction:
    """A finite list of isometries, verified closed under composition and inverses.

    Closure is checked on probe points: every product and inverse must act like
    some listed element.
    """

    def __init__(self, elements: Sequence[Isometry], tol: float = 1e-9):
        self.elements = list(elements)
        if not self.elements:
            raise ValueError("a group needs at least the identity")
        models = {e.model for e in self.elements}
        if len(models) != 1:
            raise ModelMismatchError("group elements use different models")
        self.model = models.pop()
        self.tol = tol
        self._probe = _probe_points(self.model)
        self._sigs = np.stack([e.apply_array(self._probe) for e in self.elements])
        self._check()

    def _index_of(self, images: np.ndarray) -> int | None:
        err = np.abs(self._sigs - images[None]).max(axis=(1, 2))
        i = int(np.argmin(err))
        return i if err[i] <= self.tol * (1 + np.abs(images).max()) else None

    def _check(self):
        if self._index_of(self._probe) is None:
            raise ValueError("group does not contain the identity")
        for a, b in itertools.product(self.elements, repeat=2):
            if self._index_of(a.apply_array(b.apply_array(self._probe))) is None:
                raise ValueError("element list is not closed under composition")
        for a in self.elements:
            if self._index_of(a.inverse().apply_array(self._probe)) is None:
                raise ValueError("element list is not closed under inverses")

    def __len__(self):
        return len(self.elements)

    def orbit(self, p: GroupPoint) -> list[GroupPoint]:
        return [apply_isometry(e, p) for e in self.elements]

    @classmethod
    def cyclic_rotations(cls, order: int, center: GroupPoint | None = None) -> "FiniteGroupAction":
        center = center or GroupPoint.identity(Model.SYMMETRIC)
        return cls([RotationVertical(center, 2 * np.pi * j / order) for j in range(order)])

    @classmethod
    def generate(cls, generators: Sequence[Isometry], max_size: int = 64) -> "FiniteGroupAction":
        """Close a generator list under composition; fails if the group exceeds ``max_size``."""
        if not generators:
            raise ValueError("need at least one generator")
        model = generators[0].model
        probe = _probe_points(model)
        elems: list[Isometry] = [Identity(model)]
        sigs = [probe.copy()]
        frontier = list(elems)
        while frontier:
            nxt = []
            for a in frontier:
                for g in generators:
                    c = Composition((g, a)) if not isinstance(a, Identity) else g
                    img = c.apply_array(probe)
                    if any(np.abs(img - s).max() <= 1e-9 * (1 + np.abs(img).max()) for s in sigs):
                        continue
                    elems.append(c)
                    sigs.append(img)
                    nxt.append(c)
                    if len(elems) > max_size:
                        raise ValueError("generated group is infinite or larger than max_size")
            frontier = nxt
        return cls(elems)


@dataclass
class OrbitReport:
    points: list
    diameter: float
    metric: str


def _pol(points: np.ndarray, model: Model) -> np.ndarray:
    return convert(points, model, Model.POLARIZED)


def orbit_report(H: FiniteGroupAction, p: GroupPoint, metric: str = "contraction") -> OrbitReport:
    pts = np.stack([e.apply_array(p.to_array()) for e in H.elements])
    P = _pol(pts, H.model)
    D = distance_array(P[:, None, :], P[None, :, :], metric)
    return OrbitReport([GroupPoint.from_array(q, H.model) for q in pts], float(D.max()), metric)


class PreconditionError(ValueError):
    """Input violates a documented precondition."""


@dataclass
class FixedPointResult:
    point: GroupPoint
    max_displacement: float  # in the selected metric
    max_displacement_cc: float
    orbit_diameter: float
    radius: float  # minimax radius of the orbit about the returned point


def fixed_point_center(H: FiniteGroupAction, p: GroupPoint, metric: str = "contraction",
                       radius_bound: float = 1.0, tol: float = 1e-6) -> FixedPointResult:
    """Minimax centre of the orbit ``H.p``; it is fixed by every element of ``H``.

    ``radius_bound`` stands in for the convexity radius at ``p``: the orbit
    diameter must not exceed half of it.
    """
    if p.model is not H.model:
        raise ModelMismatchError("point and group use different models")
    orb = orbit_report(H, p, metric)
    if orb.diameter > 0.5 * radius_bound:
        raise PreconditionError(
            f"orbit diameter {orb.diameter:.3g} exceeds half the radius bound {radius_bound:g}")
    if orb.diameter > 0.4 * radius_bound:
        warnings.warn("orbit diameter is close to the configured radius bound", RuntimeWarning,
                      stacklevel=2)
    orbit = np.stack([q.to_array() for q in orb.points])
    orbit_pol = _pol(orbit, H.model)

    def spread(x):
        d = distance_array(_pol(np.asarray(x)[None], H.model), orbit_pol, metric)
        return float(d.max())

    x0 = orbit.mean(axis=0)
    res = optimize.minimize(spread, x0, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000,
                                     "initial_simplex": x0 + np.vstack([np.zeros(3), 0.05 * np.eye(3)])})
    x = res.x

    def displacement(x, metric):
        imgs = np.stack([e.apply_array(x) for e in H.elements])
        return float(distance_array(_pol(x[None], H.model), _pol(imgs, H.model), metric).max())

    disp = displacement(x, metric)
    if disp > tol:
        # the minimax centre of a finite orbit is unique; symmetrise the optimiser output
        xs = np.stack([e.apply_array(x) for e in H.elements])
        x2 = optimize.minimize(spread, xs.mean(axis=0), method="Nelder-Mead",
                               options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 20000}).x
        if displacement(x2, metric) < disp:
            x, disp = x2, displacement(x2, metric)
    if disp > tol:
        raise ConvergenceError(f"fixed-point search stagnated at displacement {disp:.3g}")
    return FixedPointResult(
        point=GroupPoint.from_array(x, H.model),
        max_displacement=disp,
        max_displacement_cc=displacement(x, "cc"),
        orbit_diameter=orb.diameter,
        radius=spread(x),
    )
