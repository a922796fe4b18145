"""Arithmetic on the three-dimensional Heisenberg group.

Two coordinate models are supported.  In the *polarized* model the product is

    (x, y, z) * (x', y', z') = (x + x', y + y', z + z' + x y')

which keeps the integer lattice Z^3 closed under multiplication.  In the
*symmetric* model the correction term is (x y' - y x') / 2; rotations about the
vertical axis are automorphisms there.  The map z -> z - x y / 2 carries the
polarized model onto the symmetric one.

Array functions take ``(..., 3)`` arrays and are vectorised; :class:`GroupPoint`
is the scalar, model-tagged value type used at module boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np


class Model(str, Enum):
    POLARIZED = "polarized"
    SYMMETRIC = "symmetric"


class ModelMismatchError(ValueError):
    """Raised when points from different coordinate models are combined."""


def _as_model(model) -> Model:
    return model if isinstance(model, Model) else Model(model)


# ---------------------------------------------------------------------------
# vectorised array kernels
# ---------------------------------------------------------------------------

def mul(p, q, model=Model.POLARIZED) -> np.ndarray:
    """Group product of two ``(..., 3)`` arrays (broadcasting)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if _as_model(model) is Model.POLARIZED:
        corr = p[..., 0] * q[..., 1]
    else:
        corr = 0.5 * (p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0])
    return np.stack(
        [p[..., 0] + q[..., 0], p[..., 1] + q[..., 1], p[..., 2] + q[..., 2] + corr],
        axis=-1,
    )


def inv(p, model=Model.POLARIZED) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if _as_model(model) is Model.POLARIZED:
        z = -p[..., 2] + p[..., 0] * p[..., 1]
    else:
        z = -p[..., 2]
    return np.stack([-p[..., 0], -p[..., 1], z], axis=-1)


def to_symmetric(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0], p[..., 1], p[..., 2] - 0.5 * p[..., 0] * p[..., 1]], axis=-1)


def to_polarized(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0], p[..., 1], p[..., 2] + 0.5 * p[..., 0] * p[..., 1]], axis=-1)


def convert(p, source, target) -> np.ndarray:
    source, target = _as_model(source), _as_model(target)
    if source is target:
        return np.array(p, dtype=float)
    if target is Model.SYMMETRIC:
        return to_symmetric(p)
    return to_polarized(p)


def dilate_array(t: float, p) -> np.ndarray:
    """Homogeneous dilation (x, y, z) -> (t x, t y, t^2 z); same formula in both models."""
    if not t > 0:
        raise ValueError(f"dilation parameter must be positive, got {t!r}")
    p = np.asarray(p, dtype=float)
    return p * np.array([t, t, t * t])


def exp_algebra(v, model=Model.POLARIZED) -> np.ndarray:
    """Group exponential of a X1 + b X2 + c X3 given as ``(..., 3)`` coefficients."""
    v = np.asarray(v, dtype=float)
    if _as_model(model) is Model.POLARIZED:
        z = v[..., 2] + 0.5 * v[..., 0] * v[..., 1]
    else:
        z = v[..., 2]
    return np.stack([v[..., 0], v[..., 1], z], axis=-1)


def frame_array(p, model=Model.POLARIZED) -> np.ndarray:
    """Coordinate components of the left-invariant frame at ``p``.

    Returns ``(..., 3, 3)`` with columns X1, X2, X3.
    """
    p = np.asarray(p, dtype=float)
    out = np.zeros(p.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., 2, 2] = 1.0
    if _as_model(model) is Model.POLARIZED:
        out[..., 2, 1] = p[..., 0]
    else:
        out[..., 2, 0] = -0.5 * p[..., 1]
        out[..., 2, 1] = 0.5 * p[..., 0]
    return out


def cometric_array(p, model=Model.POLARIZED) -> np.ndarray:
    """Matrix of the sub-Riemannian cometric B_S B_S^T at ``p`` (rank two)."""
    b = frame_array(p, model)[..., :, :2]
    return b @ np.swapaxes(b, -1, -2)


# ---------------------------------------------------------------------------
# tagged scalar type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupPoint:
    x: float
    y: float
    z: float
    model: Model = Model.POLARIZED

    def __post_init__(self):
        object.__setattr__(self, "model", _as_model(self.model))
        for v in (self.x, self.y, self.z):
            if not np.isfinite(v):
                raise ValueError("group point coordinates must be finite")

    @classmethod
    def from_array(cls, a, model=Model.POLARIZED) -> "GroupPoint":
        a = np.asarray(a, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]), model)

    @classmethod
    def identity(cls, model=Model.POLARIZED) -> "GroupPoint":
        return cls(0.0, 0.0, 0.0, model)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_model(self, model) -> "GroupPoint":
        return convert_model(self, model)

    def __mul__(self, other: "GroupPoint") -> "GroupPoint":
        return group_mul(self, other)

    def __iter__(self):
        return iter((self.x, self.y, self.z))


@dataclass(frozen=True)
class LatticePoint:
    """Element (m, n, k) of the integer lattice, acting in the polarized model."""

    m: int
    n: int
    k: int

    def __mul__(self, other: "LatticePoint") -> "LatticePoint":
        return LatticePoint(self.m + other.m, self.n + other.n, self.k + other.k + self.m * other.n)

    def inverse(self) -> "LatticePoint":
        return LatticePoint(-self.m, -self.n, -self.k + self.m * self.n)

    def to_point(self) -> GroupPoint:
        return GroupPoint(float(self.m), float(self.n), float(self.k), Model.POLARIZED)

    def to_array(self) -> np.ndarray:
        return np.array([self.m, self.n, self.k], dtype=float)

    def __iter__(self):
        return iter((self.m, self.n, self.k))


def _check_same(p: GroupPoint, q: GroupPoint):
    if p.model is not q.model:
        raise ModelMismatchError(f"cannot combine {p.model.value} and {q.model.value} points")


def group_mul(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    _check_same(p, q)
    return GroupPoint.from_array(mul(p.to_array(), q.to_array(), p.model), p.model)


def group_inv(p: GroupPoint) -> GroupPoint:
    return GroupPoint.from_array(inv(p.to_array(), p.model), p.model)


def convert_model(p: GroupPoint, target) -> GroupPoint:
    target = _as_model(target)
    return GroupPoint.from_array(convert(p.to_array(), p.model, target), target)


def dilate(t: float, p: GroupPoint) -> GroupPoint:
    return GroupPoint.from_array(dilate_array(t, p.to_array()), p.model)


def left_invariant_frame(p: GroupPoint) -> np.ndarray:
    """3x3 matrix whose columns are X1, X2, X3 at ``p``."""
    return frame_array(p.to_array(), p.model)


def cometric(p: GroupPoint) -> np.ndarray:
    return cometric_array(p.to_array(), p.model)


# ---------------------------------------------------------------------------
# brackets and flows
# ---------------------------------------------------------------------------

VectorField = Callable[[np.ndarray], np.ndarray]


def numerical_bracket(X: VectorField, Y: VectorField, p, step: float = 1e-5) -> np.ndarray:
    """[X, Y](p) = DY(p) X(p) - DX(p) Y(p) with central-difference Jacobians."""
    p = np.asarray(p, dtype=float)
    eye = np.eye(3) * step
    DX = np.stack([(X(p + e) - X(p - e)) / (2 * step) for e in eye], axis=-1)
    DY = np.stack([(Y(p + e) - Y(p - e)) / (2 * step) for e in eye], axis=-1)
    return DY @ X(p) - DX @ Y(p)


def frame_fields(model=Model.POLARIZED) -> tuple[VectorField, VectorField, VectorField]:
    """The frame as three callables p -> X_i(p)."""
    return tuple(
        (lambda p, i=i: frame_array(p, model)[..., :, i]) for i in range(3)
    )


def hormander_rank(p: GroupPoint, fields=None, tol: float = 1e-8) -> int:
    """Rank of span(S_p + [S_p, S_p]) for a horizontal family (default X1, X2)."""
    if fields is None:
        fields = frame_fields(p.model)[:2]
    a = p.to_array()
    vecs = [f(a) for f in fields]
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            vecs.append(numerical_bracket(fields[i], fields[j], a))
    return int(np.linalg.matrix_rank(np.array(vecs), tol=tol))


def horizontal_rank(p: GroupPoint) -> int:
    return int(np.linalg.matrix_rank(cometric(p), tol=1e-12))


def _flow_frame(p: np.ndarray, coeffs, t: float) -> np.ndarray:
    # left-invariant flows are right multiplication by the exponential
    return mul(p, exp_algebra(t * np.asarray(coeffs, dtype=float)))


def commutator_flow_endpoint(t: float, X=(1.0, 0.0, 0.0), Y=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Endpoint of e^{-tY} e^{-tX} e^{tY} e^{tX} applied to the origin.

    ``X`` and ``Y`` are constant frame coefficient vectors (left-invariant fields).
    """
    p = np.zeros(3)
    for coeffs, s in ((X, t), (Y, t), (X, -t), (Y, -t)):
        p = _flow_frame(p, coeffs, s)
    return p


def commutator_flow_residual(t: float, horizontal: bool = True) -> np.ndarray:
    """Coordinate difference between the four-flow loop and exp(t^2 [X, Y]).

    With ``horizontal`` the loop uses X1, X2 and the bracket X3; otherwise the
    loop uses X1, X3 whose bracket vanishes.
    """
    if abs(t) > 1:
        raise ValueError("|t| must not exceed 1")
    if horizontal:
        X, Y, br = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
    else:
        X, Y, br = (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, 0.0)
    end = commutator_flow_endpoint(t, X, Y)
    target = exp_algebra(t * t * np.asarray(br))
    return end - target


def flow_ode(field: VectorField, p0, t: float, rtol: float = 1e-12, atol: float = 1e-14) -> np.ndarray:
    """Integrate dp/ds = field(p) for time ``t`` (negative allowed)."""
    from scipy.integrate import solve_ivp

    if t == 0:
        return np.asarray(p0, dtype=float)
    sol = solve_ivp(lambda s, y: field(y), (0.0, t), np.asarray(p0, dtype=float),
                    method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1]


def generic_commutator_residual(t: float, X: VectorField, Y: VectorField, p0=(0.0, 0.0, 0.0)) -> float:
    """Norm of loop endpoint minus the flow of [X, Y] for time t^2, for arbitrary smooth fields."""
    p = np.asarray(p0, dtype=float)
    for f, s in ((X, t), (Y, t), (X, -t), (Y, -t)):
        p = flow_ode(f, p, s)
    bracket = lambda q: numerical_bracket(X, Y, q)  # noqa: E731
    ref = flow_ode(bracket, p0, t * t)
    return float(np.linalg.norm(p - ref))


# ---------------------------------------------------------------------------
# bulk self-check
# ---------------------------------------------------------------------------

def _rotate(p, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c * p[..., 0] - s * p[..., 1], s * p[..., 0] + c * p[..., 1], p[..., 2]], axis=-1)


def algebra_check(samples: int = 100_000, seed: int = 0, scale: float = 2.0) -> dict:
    """Largest residuals of the group axioms on random triples in [-scale, scale]^3.

    Covers associativity and inverses in both models, dilations and (symmetric
    model) vertical rotations as automorphisms, and the model conversion as a
    homomorphism.
    """
    rng = np.random.default_rng(seed)
    p, q, r = (rng.uniform(-scale, scale, (samples, 3)) for _ in range(3))
    t = rng.uniform(0.1, 3.0, (samples, 1))
    tvec = np.hstack([t, t, t * t])
    theta = rng.uniform(0, 2 * np.pi)
    out = {}
    for model in Model:
        assoc = mul(mul(p, q, model), r, model) - mul(p, mul(q, r, model), model)
        left = mul(inv(p, model), p, model)
        right = mul(p, inv(p, model), model)
        dil = tvec * mul(p, q, model) - mul(tvec * p, tvec * q, model)
        out[f"associativity_{model.value}"] = float(np.abs(assoc).max())
        out[f"inverse_{model.value}"] = float(max(np.abs(left).max(), np.abs(right).max()))
        out[f"dilation_{model.value}"] = float(np.abs(dil).max())
    rot = _rotate(mul(p, q, Model.SYMMETRIC), theta) - mul(_rotate(p, theta), _rotate(q, theta), Model.SYMMETRIC)
    out["rotation_symmetric"] = float(np.abs(rot).max())
    hom = to_symmetric(mul(p, q, Model.POLARIZED)) - mul(to_symmetric(p), to_symmetric(q), Model.SYMMETRIC)
    back = to_polarized(to_symmetric(p)) - p
    out["conversion_homomorphism"] = float(np.abs(hom).max())
    out["conversion_roundtrip"] = float(np.abs(back).max())
    out["samples"] = int(samples)
    return out
