"""Curve lengths and distances on the Heisenberg group.

Two metrics are available:

``cc``
    the Carnot-Caratheodory distance: infimum of lengths of horizontal curves
    (velocity in span{X1, X2}, with X1, X2 orthonormal).
``contraction``
    the left-invariant Riemannian metric for which X1, X2, X3 are orthonormal.
    It agrees with the sub-Riemannian metric on horizontal vectors, so its
    distance never exceeds the CC distance.

Each metric has two independent solvers.  The *oracle* minimises length over
piecewise-constant controls with exact group-exponential steps; it returns a
feasible upper bound.  The *shooting* solver integrates the normal geodesic
equations in closed form and solves the boundary problem by root finding.
Vectorised ``*_norm`` functions give the shooting distance from the identity
for whole arrays of targets.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .heisenberg import GroupPoint, Model, exp_algebra, inv, mul, to_polarized, to_symmetric

log = logging.getLogger(__name__)

METRICS = ("cc", "contraction")
ENDPOINT_TOL = 1e-6


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""


def _check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    return metric


def _polarized(p) -> np.ndarray:
    if isinstance(p, GroupPoint):
        a = p.to_array()
        return to_polarized(a) if p.model is Model.SYMMETRIC else a
    return np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# control paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlPath:
    """Piecewise-constant frame controls: ``controls[i]`` is held for ``durations[i]``.

    Two columns describe a horizontal curve, three columns a curve for the
    Riemannian contraction.
    """

    start: GroupPoint
    controls: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.controls, dtype=float))
        d = np.atleast_1d(np.asarray(self.durations, dtype=float))
        if c.size == 0:
            c = c.reshape(0, 2)
            d = d.reshape(0)
        if c.shape[1] not in (2, 3):
            raise ValueError("controls must have 2 or 3 columns")
        if len(c) != len(d):
            raise ValueError("need one duration per control")
        if np.any(d <= 0):
            raise ValueError("durations must be positive")
        object.__setattr__(self, "controls", c)
        object.__setattr__(self, "durations", d)

    @property
    def horizontal(self) -> bool:
        return self.controls.shape[1] == 2


def _steps_from_controls(controls: np.ndarray, durations: np.ndarray) -> np.ndarray:
    s = controls * durations[:, None]
    if s.shape[1] == 2:
        s = np.concatenate([s, np.zeros((len(s), 1))], axis=1)
    return s


def _endpoint_from_steps(steps: np.ndarray) -> np.ndarray:
    """Identity times exp(s_1) exp(s_2) ... in polarized coordinates (exact)."""
    a, b, c = steps[:, 0], steps[:, 1], steps[:, 2]
    x_before = np.concatenate([[0.0], np.cumsum(a)[:-1]])
    return np.array([a.sum(), b.sum(), np.sum(c + 0.5 * a * b + x_before * b)])


def integrate_path(path: ControlPath) -> tuple[GroupPoint, float]:
    """Endpoint and length of a control path; the endpoint carries no integration error."""
    if len(path.controls) == 0:
        return path.start, 0.0
    steps = _steps_from_controls(path.controls, path.durations)
    rel = _endpoint_from_steps(steps)
    start = path.start
    if start.model is Model.SYMMETRIC:
        end = to_symmetric(mul(to_polarized(start.to_array()), rel))
    else:
        end = mul(start.to_array(), rel)
    length = float(np.sum(np.linalg.norm(path.controls, axis=1) * path.durations))
    return GroupPoint.from_array(end, start.model), length


# ---------------------------------------------------------------------------
# normal geodesics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicParams:
    """Initial covector (lambda_x, lambda_y, lambda_z) at ``start`` in polarized coordinates."""

    covector: tuple[float, float, float]
    start: GroupPoint = field(default_factory=GroupPoint.identity)

    def frame_covector(self) -> np.ndarray:
        lx, ly, lz = self.covector
        x = _polarized(self.start)[0]
        return np.array([lx, ly + x * lz, lz])

    def hamiltonian(self, metric: str = "cc") -> float:
        h = self.frame_covector()
        e = 0.5 * (h[0] ** 2 + h[1] ** 2)
        return e + 0.5 * h[2] ** 2 if _check_metric(metric) == "contraction" else e


def _sinc_half(phi):
    """sin(phi/2) / (phi/2), safe at zero."""
    return np.sinc(np.asarray(phi) / (2 * np.pi))


def _area_factor(phi):
    """(phi - sin phi) / phi^2 with its series near zero."""
    phi = np.asarray(phi, dtype=float)
    small = np.abs(phi) < 1e-3
    safe = np.where(small, 1.0, phi)
    exact = (safe - np.sin(safe)) / safe**2
    series = phi / 6 - phi**3 / 120
    return np.where(small, series, exact)


def geodesic_endpoint(h, T: float, metric: str = "cc") -> np.ndarray:
    """Closed-form endpoint (symmetric coordinates) of the normal geodesic from the identity.

    ``h`` holds the frame components (h1, h2, h3) of the initial covector.  The
    horizontal pair rotates at angular rate h3, which gives circular arcs in
    the plane; for ``contraction`` the curve also climbs at vertical speed h3.
    """
    h1, h2, h3 = (float(v) for v in h)
    phi = h3 * T
    w0 = complex(h1, h2)
    zeta = w0 * T * np.exp(0.5j * phi) * _sinc_half(phi)
    z = abs(w0) ** 2 * T**2 * _area_factor(phi) / 2
    if _check_metric(metric) == "contraction":
        z += h3 * T
    return np.array([zeta.real, zeta.imag, float(z)])


def geodesic_ode(params: GeodesicParams, T: float, metric: str = "cc",
                 rtol: float = 1e-11, atol: float = 1e-13):
    """Integrate the Hamiltonian equations numerically (polarized coordinates).

    Returns the solver result; rows are (x, y, z, lambda_x, lambda_y, lambda_z).
    """
    riem = _check_metric(metric) == "contraction"

    def rhs(_, s):
        x, _, _, lx, ly, lz = s
        h1, h2 = lx, ly + x * lz
        return [h1, h2, x * h2 + (lz if riem else 0.0), -h2 * lz, 0.0, 0.0]

    y0 = np.concatenate([_polarized(params.start), np.asarray(params.covector, dtype=float)])
    return solve_ivp(rhs, (0.0, T), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

def _reduce(g_pol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Planar radius and |vertical| symmetric coordinate of targets.

    Rotations about the vertical axis and the reflection (x, y, z) -> (x, -y, -z)
    are isometries of both metrics fixing the identity, so distances depend on
    these two numbers only.
    """
    s = to_symmetric(g_pol)
    return np.hypot(s[..., 0], s[..., 1]), np.abs(s[..., 2])


_VERTICAL_EPS = 1e-9


def _mu(u):
    """(2u - sin 2u) / (8 sin^2 u): vertical-over-radius-squared along a geodesic family."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-3
    safe = np.where(small, 1.0, u)
    exact = (2 * safe - np.sin(2 * safe)) / (8 * np.sin(safe) ** 2)
    return np.where(small, u / 6 + u**3 / 45, exact)


def _u_over_sin(u):
    return 1.0 / np.sinc(np.asarray(u) / np.pi)


def _branch_length(u, r, metric):
    if metric == "cc":
        return r * np.abs(_u_over_sin(u))
    return np.sqrt(4 * u**2 + (r * _u_over_sin(u)) ** 2)


def _branch_residual(u, r, Z, metric):
    f = r**2 * _mu(u) - Z
    return f + 2 * u if metric == "contraction" else f


def _principal_u(r, Z, metric, iters: int = 60):
    """Root of the principal-branch equation on [0, pi) by vectorised bisection."""
    lo = np.zeros_like(r)
    hi = np.full_like(r, np.pi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = _branch_residual(mid, r, Z, metric) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return 0.5 * (lo + hi)


def _norm_reduced(r, Z, metric):
    r = np.asarray(r, dtype=float)
    Z = np.asarray(Z, dtype=float)
    out = np.empty(np.broadcast(r, Z).shape)
    r, Z = np.broadcast_arrays(r, Z)
    if metric == "cc":
        # bisection cannot resolve sin u ~ r near u = pi; the vertical value is within ~r
        vertical = r <= _VERTICAL_EPS * np.sqrt(Z)
        out[vertical] = np.sqrt(4 * np.pi * Z[vertical])
        m = ~vertical
        u = _principal_u(r[m], Z[m], metric)
        out[m] = _branch_length(u, r[m], metric)
        return out
    vertical = r == 0
    out[vertical] = Z[vertical]
    m = ~vertical
    u = _principal_u(r[m], Z[m], metric)
    out[m] = _branch_length(u, r[m], metric)
    # other branches all have length >= 2 pi; resolve those cases one by one
    bad = np.flatnonzero(out.ravel() >= 2 * np.pi)
    flat = out.ravel()
    for i in bad:
        flat[i] = min(_scan_branches(float(r.ravel()[i]), float(Z.ravel()[i]), metric)[0][0],
                      flat[i])
    return flat.reshape(out.shape)


def cc_norm(g) -> np.ndarray:
    """CC distance from the identity to each polarized target in ``g`` (shape (..., 3))."""
    r, Z = _reduce(np.asarray(g, dtype=float))
    return _norm_reduced(r, Z, "cc")


def contraction_norm(g) -> np.ndarray:
    """Riemannian-contraction distance from the identity to polarized targets."""
    r, Z = _reduce(np.asarray(g, dtype=float))
    return _norm_reduced(r, Z, "contraction")


def distance_array(p, q, metric: str = "cc") -> np.ndarray:
    """Vectorised distance between polarized points (broadcasting)."""
    g = mul(inv(p), q)
    return cc_norm(g) if _check_metric(metric) == "cc" else contraction_norm(g)


def _scan_branches(r: float, Z: float, metric: str, max_branch: int = 8,
                   samples: int = 400) -> list[tuple[float, float]]:
    """All (length, u) solutions found on branches u in (k pi, (k+1) pi), sorted by length."""
    sols: list[tuple[float, float]] = []
    if r == 0 or (metric == "cc" and r <= _VERTICAL_EPS * np.sqrt(Z)):
        if metric == "cc":
            return [(float(np.sqrt(4 * np.pi * Z)), float(np.pi))]
        if Z < 2 * np.pi:
            sols.append((Z, Z / 2))
        k = 1
        while 2 * np.pi * k <= Z and k <= max_branch:
            sols.append((2 * np.sqrt(np.pi * k * (Z - np.pi * k)), np.pi * k))
            k += 1
        return sorted(sols) or [(Z, Z / 2)]
    eps = 1e-12
    for k in range(max_branch + 1):
        best = sols[0][0] if sols else np.inf
        floor_len = 2 * np.pi * k if metric == "contraction" else r * np.pi * k
        if floor_len > best:
            break
        grid = np.linspace(k * np.pi + (eps if k else 0.0), (k + 1) * np.pi - eps, samples)
        vals = _branch_residual(grid, r, Z, metric)
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0):
            try:
                u = optimize.brentq(_branch_residual, grid[i], grid[i + 1],
                                    args=(r, Z, metric), xtol=1e-15, rtol=1e-15)
            except ValueError:
                continue
            sols.append((float(_branch_length(u, r, metric)), float(u)))
        sols.sort()
    return sols


def _covector_from_branch(u: float, T: float, target_sym: np.ndarray, metric: str) -> np.ndarray:
    """Unit-speed frame covector (h1, h2, h3) of the geodesic with turning 2u and length T."""
    phi = 2 * u
    omega = phi / T
    rho = 1.0 if metric == "cc" else np.sqrt(max(0.0, 1 - omega**2))
    sign_z = 1.0 if target_sym[2] >= 0 else -1.0
    omega *= sign_z
    planar = complex(target_sym[0], target_sym[1] * sign_z)
    theta = np.angle(planar) - phi / 2 if abs(planar) > 0 else 0.0
    if np.sinc(u / np.pi) < 0:
        theta += np.pi
    h = np.array([rho * np.cos(theta), rho * np.sin(theta), omega])
    if sign_z < 0:
        h[1] = -h[1]
    return h


@dataclass
class ShootResult:
    length: float
    covector: np.ndarray  # frame components at the start point
    residual: float
    candidates: int
    fallback: bool = False


def _shoot_polish(h0: np.ndarray, T0: float, target_sym: np.ndarray, metric: str):
    """Newton-type polish of (theta, omega, T) on the full three-dimensional endpoint map."""
    rho0 = np.hypot(h0[0], h0[1])
    x0 = np.array([np.arctan2(h0[1], h0[0]), h0[2], T0])

    def covec(x):
        th, om, _ = x
        rho = 1.0 if metric == "cc" else np.sqrt(max(0.0, 1 - om**2))
        return np.array([rho * np.cos(th), rho * np.sin(th), om])

    def resid(x):
        return geodesic_endpoint(covec(x), x[2], metric) - target_sym

    if metric == "contraction" and rho0 < 1e-12:
        return covec(x0), x0[2], float(np.linalg.norm(resid(x0)))
    sol = optimize.least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return covec(sol.x), float(sol.x[2]), float(np.linalg.norm(sol.fun))


def shoot(p, q, metric: str = "cc", tol: float = 1e-9) -> ShootResult:
    """Solve the geodesic boundary problem between ``p`` and ``q``; keep the shortest solution."""
    _check_metric(metric)
    g = mul(inv(_polarized(p)), _polarized(q))
    target = to_symmetric(g)
    if np.allclose(g, 0.0, atol=0.0):
        return ShootResult(0.0, np.zeros(3), 0.0, 0)
    r, Z = float(np.hypot(target[0], target[1])), float(abs(target[2]))
    sols = _scan_branches(r, Z, metric)
    scale = 1.0 + float(np.linalg.norm(target))
    accepted = []
    for T, u in sols:
        h = _covector_from_branch(u, T, target, metric)
        h, T_pol, res = _shoot_polish(h, T, target, metric)
        if res <= tol * scale and T_pol > 0:
            accepted.append((T_pol, h, res))
    if not accepted:
        warnings.warn("shooting did not converge; falling back to the control oracle",
                      RuntimeWarning, stacklevel=2)
        dist = cc_distance_upper(p, q) if metric == "cc" else contraction_distance(p, q)
        return ShootResult(dist, np.full(3, np.nan), np.nan, 0, fallback=True)
    T, h, res = min(accepted, key=lambda a: a[0])
    return ShootResult(T, h, res, len(accepted))


def cc_distance_shoot(p, q) -> float:
    return shoot(p, q, "cc").length


def contraction_distance_shoot(p, q) -> float:
    return shoot(p, q, "contraction").length


# ---------------------------------------------------------------------------
# control-optimisation oracle
# ---------------------------------------------------------------------------

def _endpoint_and_jac(s: np.ndarray, dim: int):
    a, b = s[:, 0], s[:, 1]
    c = s[:, 2] if dim == 3 else np.zeros_like(a)
    x_before = np.concatenate([[0.0], np.cumsum(a)[:-1]])
    b_after = np.concatenate([np.cumsum(b[::-1])[::-1][1:], [0.0]])
    end = np.array([a.sum(), b.sum(), np.sum(c + 0.5 * a * b + x_before * b)])
    n = len(a)
    jac = np.zeros((3, n, dim))
    jac[0, :, 0] = 1.0
    jac[1, :, 1] = 1.0
    jac[2, :, 0] = 0.5 * b + b_after
    jac[2, :, 1] = 0.5 * a + x_before
    if dim == 3:
        jac[2, :, 2] = 1.0
    return end, jac.reshape(3, n * dim)


def _arc_seed(r: float, z: float, turn: float, n: int, dim: int) -> np.ndarray:
    """Polygon on a circular arc from the identity to (r, 0) with total tangent turning ``turn``."""
    if r > 1e-12:
        length = r / np.sinc(turn / (2 * np.pi))
        sigma = np.linspace(0, 1, n + 1)
        ang = -turn / 2 + turn * sigma
        ds = length / n
        mids = 0.5 * (ang[:-1] + ang[1:])
        steps = np.stack([ds * np.cos(mids), ds * np.sin(mids)], axis=1)
        steps[:, 0] += (r - steps[:, 0].sum()) / n
        steps[:, 1] -= steps[:, 1].sum() / n
    else:
        # closed loop enclosing roughly the requested area
        length = np.sqrt(4 * np.pi * max(abs(z), 1e-12)) * turn / (2 * np.pi)
        ang = 2 * np.pi * (np.arange(n) + 0.5) / n
        steps = length / n * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 2:
        return steps
    s3 = np.concatenate([steps, np.zeros((n, 1))], axis=1)
    z_now = _endpoint_from_steps(s3)[2]
    s3[:, 2] = (z - z_now) / n
    return s3


@dataclass
class OracleResult:
    length: float
    steps: np.ndarray
    constraint_error: float


def _optimize_controls(target: np.ndarray, segments: int, dim: int,
                       seeds: Sequence[np.ndarray], tol: float = ENDPOINT_TOL) -> OracleResult:
    n = segments
    best: OracleResult | None = None

    def energy(v):
        return float(v @ v), 2 * v

    def cons(v):
        return _endpoint_and_jac(v.reshape(n, dim), dim)[0] - target

    def cons_jac(v):
        return _endpoint_and_jac(v.reshape(n, dim), dim)[1]

    for seed in seeds:
        v = np.asarray(seed, dtype=float).ravel()
        mu = 10.0
        while mu < 1e9:
            def pen(v, mu=mu):
                e, ge = energy(v)
                c, J = _endpoint_and_jac(v.reshape(n, dim), dim)
                c = c - target
                return e + mu * c @ c, ge + 2 * mu * J.T @ c

            v = optimize.minimize(pen, v, jac=True, method="L-BFGS-B",
                                  options={"maxiter": 2000, "gtol": 1e-12}).x
            if np.linalg.norm(cons(v)) <= 1e-3:
                break
            mu *= 10.0
        res = optimize.minimize(lambda v: energy(v)[0], v, jac=lambda v: energy(v)[1],
                                method="SLSQP",
                                constraints=[{"type": "eq", "fun": cons, "jac": cons_jac}],
                                options={"maxiter": 1000, "ftol": 1e-15})
        err = float(np.linalg.norm(cons(res.x)))
        if err > tol:
            continue
        steps = res.x.reshape(n, dim)
        length = float(np.linalg.norm(steps, axis=1).sum())
        if best is None or length < best.length:
            best = OracleResult(length, steps, err)
    if best is None:
        raise ConvergenceError(f"control oracle missed the endpoint tolerance {tol:g}")
    return best


_CC_TURNS = (0.25 * np.pi, 0.75 * np.pi, 1.25 * np.pi, 1.75 * np.pi)
_R_TURNS = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)


def _oracle_distance(p, q, metric: str, segments: int, canonical: bool) -> float:
    if segments < 4:
        raise ValueError("need at least 4 segments")
    g = mul(inv(_polarized(p)), _polarized(q))
    if np.all(g == 0):
        return 0.0
    dim = 2 if metric == "cc" else 3
    turns = _CC_TURNS if metric == "cc" else _R_TURNS
    if canonical:
        r, Z = (float(v) for v in _reduce(g))
        scale = 1.0
        if metric == "cc":
            scale = (r**4 + Z**2) ** 0.25
            r, Z = r / scale, Z / scale**2
        target = np.array([r, 0.0, Z])
        seeds = [_arc_seed(r, Z, t, segments, dim) for t in turns]
        return scale * _optimize_controls(target, segments, dim, seeds).length
    # general orientation: rotate seeds built for the reduced problem
    s = to_symmetric(g)
    r = float(np.hypot(s[0], s[1]))
    ang = np.arctan2(s[1], s[0]) if r > 0 else 0.0
    sign = 1.0 if s[2] >= 0 else -1.0
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    seeds = []
    for t in turns:
        st = _arc_seed(r, abs(s[2]), t, segments, dim)
        st[:, 1] *= sign
        st[:, :2] = st[:, :2] @ rot.T
        if dim == 3:
            st[:, 2] *= sign
            st[:, 2] += (g[2] - _endpoint_from_steps(st)[2]) / segments
        seeds.append(st)
    return _optimize_controls(g, segments, dim, seeds).length


def cc_distance_upper(p, q, segments: int = 64, canonical: bool = True) -> float:
    """Feasible upper bound on the CC distance from optimised horizontal controls.

    With ``canonical`` the target is first reduced by the rotation, reflection
    and dilation symmetries; this makes the result exactly symmetric and
    homogeneous.
    """
    return _oracle_distance(p, q, "cc", segments, canonical)


def contraction_distance(p, q, segments: int = 64, canonical: bool = True) -> float:
    """Riemannian-contraction distance by the same control oracle with three controls."""
    return _oracle_distance(p, q, "contraction", segments, canonical)


def distance(p, q, metric: str = "cc", solver: str = "shoot", segments: int = 64) -> float:
    _check_metric(metric)
    if solver == "shoot":
        return shoot(p, q, metric).length
    if solver == "oracle":
        return _oracle_distance(p, q, metric, segments, True)
    raise ValueError(f"unknown solver {solver!r}")


# ---------------------------------------------------------------------------
# estimate constant
# ---------------------------------------------------------------------------

@dataclass
class DistanceEstimateReport:
    """Empirical constant c with d <= c * d_R^(1/2) over sampled pairs."""

    c_fit: float
    violations: int
    samples: int
    skipped: int
    box: tuple
    ratios: np.ndarray = field(repr=False)
    contraction_exceeds_cc: int = 0

    def quantiles(self, qs=(0.5, 0.9, 0.99, 1.0)) -> dict:
        return {float(q): float(np.quantile(self.ratios, q)) for q in qs}

    def to_dict(self) -> dict:
        return {
            "c_fit": self.c_fit,
            "violations": self.violations,
            "samples": self.samples,
            "skipped": self.skipped,
            "box": [list(map(float, b)) for b in self.box],
            "contraction_exceeds_cc": self.contraction_exceeds_cc,
            "ratio_quantiles": self.quantiles(),
        }


def sample_pairs(box, samples: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, (samples, 3)), rng.uniform(lo, hi, (samples, 3))


def estimate_constant(box=((0, 0, 0), (1, 1, 1)), samples: int = 1000, seed: int = 0,
                      solver: str = "shoot", segments: int = 32) -> DistanceEstimateReport:
    """Fit the constant of the estimate d <= c * d_R^(1/2) on random pairs from ``box``."""
    if samples < 100:
        raise ValueError("estimate_constant needs at least 100 samples")
    P, Q = sample_pairs(box, samples, seed)
    same = np.all(P == Q, axis=1)
    P, Q = P[~same], Q[~same]
    if solver == "shoot":
        d = distance_array(P, Q, "cc")
        dr = distance_array(P, Q, "contraction")
    else:
        d = np.array([cc_distance_upper(a, b, segments) for a, b in zip(P, Q)])
        dr = np.array([contraction_distance(a, b, segments) for a, b in zip(P, Q)])
    ratios = d / np.sqrt(dr)
    c_fit = float(ratios.max())
    return DistanceEstimateReport(
        c_fit=c_fit,
        violations=int(np.count_nonzero(d > c_fit * np.sqrt(dr))),
        samples=int(len(ratios)),
        skipped=int(same.sum()),
        box=tuple(tuple(map(float, b)) for b in box),
        ratios=ratios,
        contraction_exceeds_cc=int(np.count_nonzero(dr > d * (1 + 1e-12))),
    )


def path_from_steps(steps: np.ndarray, start: GroupPoint | None = None) -> ControlPath:
    """Unit-total-time control path realising the given exponential steps."""
    n = len(steps)
    return ControlPath(start or GroupPoint.identity(), steps * n, np.full(n, 1.0 / n))


def exp_step(v) -> np.ndarray:
    return exp_algebra(v)
