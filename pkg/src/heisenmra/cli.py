"""Command-line front end.

Every command writes a JSON report (``<out>/<command>.json``) that embeds the
tool version and a hash of the effective configuration, plus any voxel dumps
and CSV tables it produces.  Exit status: 0 when all checks pass, 1 when a
check fails or a module raises, 2 on usage errors.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Callable

import click
import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__
from .fundamental import DirichletSpec, dirichlet_cell, dirichlet_grid, verify_fundamental_set
from .heisenberg import GroupPoint, Model, algebra_check, commutator_flow_residual, hormander_rank
from .ifs import (attractor_fixed_point, box_seed, build_ifs, cube_seed, tile_grid, verify_self_similarity,
                  verify_tiling)
from .isometry import (FiniteGroupAction, LeftTranslation, PointMap, RotationVertical,
                       check_infinitesimal_isometry, fixed_point_center)
from .metrics import cc_distance_upper, contraction_distance, estimate_constant, shoot
from .mra import default_test_functions, mra_diagnostics, project_onto_level, write_coefficients_csv
from .voxels import VoxelSet, read_voxels, write_voxels

log = logging.getLogger("heisenmra")

DEFAULT_RES = {"dirichlet": 32, "tile": 128, "mra": 128}


@dataclasses.dataclass
class RunConfig:
    command: str = "all"
    model: str = "polarized"
    t: float = 0.5
    res: int | None = None
    box: list | None = None  # [[x0, y0, z0], [x1, y1, z1]]; default depends on the command
    seed: int = 0
    metric: str = "contraction"
    threads: int | None = None
    out: str = "out"
    options: dict = dataclasses.field(default_factory=dict)
    tolerances: dict = dataclasses.field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.model not in ("polarized", "symmetric"):
            raise click.UsageError(f"model must be polarized or symmetric, got {self.model!r}")
        if self.metric not in ("cc", "contraction"):
            raise click.UsageError(f"metric must be cc or contraction, got {self.metric!r}")
        s = 1 / self.t if self.t > 0 else 0
        if not (0 < self.t < 1) or abs(s - round(s)) > 1e-9:
            raise click.UsageError(f"--t must be 1/integer with 0 < t < 1, got {self.t}")
        if self.res is not None and not 32 <= int(self.res) <= 512:
            raise click.UsageError(f"--res must lie in [32, 512], got {self.res}")
        if self.box is not None:
            try:
                lo, hi = (np.asarray(b, float).reshape(3) for b in self.box)
            except (TypeError, ValueError) as exc:
                raise click.UsageError("box must be two points [[x0, y0, z0], [x1, y1, z1]]") from exc
            if not np.all(hi > lo):
                raise click.UsageError("box upper corner must exceed the lower corner")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise click.UsageError("--seed must be an unsigned 64-bit integer")
        if self.threads is not None and self.threads < 1:
            raise click.UsageError("--threads must be positive")
        for k, v in self.tolerances.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise click.UsageError(f"tolerance {k!r} must be positive")
        return self

    def resolution(self, family: str) -> int:
        return int(self.res) if self.res is not None else DEFAULT_RES.get(family, 64)

    def option(self, section: str, key: str, default):
        return self.options.get(section, {}).get(key, default)

    def digest(self) -> str:
        # output location and thread count do not affect results
        body = {k: v for k, v in dataclasses.asdict(self).items() if k not in ("out", "threads", "command")}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise click.UsageError("config must be a mapping")
    return data


def make_config(command: str, config_path, **flags) -> RunConfig:
    data = load_config(config_path)
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    top = {k: v for k, v in data.items() if k in fields and k not in ("options", "command")}
    options = {k: v for k, v in data.items() if isinstance(v, dict) and k not in ("tolerances",)}
    unknown = set(data) - fields - set(options)
    if unknown:
        raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    top.update({k: v for k, v in flags.items() if v is not None})
    try:
        cfg = RunConfig(command=command, options=options, **top)
    except TypeError as exc:
        raise click.UsageError(str(exc)) from exc
    return cfg.validate()


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (np.floating, float)):
        return float(o)
    return o


def write_report(cfg: RunConfig, name: str, result: dict, passed: bool) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "tool": "heisenmra",
        "version": __version__,
        "command": name,
        "config_hash": cfg.digest(),
        "config": {k: v for k, v in dataclasses.asdict(cfg).items() if k not in ("out", "threads")},
        "passed": bool(passed),
        "result": _jsonable(result),
    }
    path = out / f"{name.replace(' ', '_')}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _point(text: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise click.BadParameter(f"expected x,y,z, got {text!r}") from exc
    if len(vals) != 3:
        raise click.BadParameter(f"expected three coordinates, got {text!r}")
    return np.array(vals)


# ---------------------------------------------------------------------------
# pipelines: each returns (result dict, passed)
# ---------------------------------------------------------------------------

def run_group_check(cfg: RunConfig) -> tuple[dict, bool]:
    samples = int(cfg.option("group", "samples", 100_000))
    res = algebra_check(samples, cfg.seed)
    tol = cfg.tolerances.get("algebra", 1e-12)
    algebra_ok = all(v <= tol for k, v in res.items() if k != "samples")
    comm = {str(t): float(np.abs(commutator_flow_residual(t)).max()) for t in (0.2, 0.1, 0.05)}
    ranks = {m.value: hormander_rank(GroupPoint(0.3, -0.7, 0.2, m)) for m in Model}
    passed = algebra_ok and max(comm.values()) <= tol and all(r == 3 for r in ranks.values())
    return {"algebra": res, "commutator_residual": comm, "hormander_rank": ranks}, passed


def run_dist_pair(cfg: RunConfig, p=None, q=None) -> tuple[dict, bool]:
    p = np.zeros(3) if p is None else p
    q = np.array([1.0, 0.0, 0.0]) if q is None else q
    sh = shoot(p, q, cfg.metric)
    segments = int(cfg.option("dist", "segments", 48))
    oracle = (cc_distance_upper if cfg.metric == "cc" else contraction_distance)(p, q, segments)
    rel = abs(oracle - sh.length) / max(sh.length, 1e-300)
    tol = cfg.tolerances.get("oracle_agreement", 0.01)
    return {"p": p, "q": q, "metric": cfg.metric, "shoot": sh.length, "oracle": oracle,
            "relative_difference": rel, "shoot_residual": sh.residual}, rel <= tol


def run_dist_estimate(cfg: RunConfig) -> tuple[dict, bool]:
    samples = int(cfg.option("dist", "samples", 1000))
    rep = estimate_constant(samples=samples, seed=cfg.seed)
    write_csv(Path(cfg.out) / "dist_estimate_ratios.csv", ["index", "ratio"],
              ((i, r) for i, r in enumerate(rep.ratios)))
    return rep.to_dict(), rep.violations == 0 and rep.contraction_exceeds_cc == 0


def run_iso_verify(cfg: RunConfig) -> tuple[dict, bool]:
    rng = np.random.default_rng(cfg.seed)
    center = GroupPoint.from_array(rng.uniform(-1, 1, 3), Model.SYMMETRIC)
    tol = cfg.tolerances.get("isometry", 1e-6)
    checks = {
        "rotation": check_infinitesimal_isometry(RotationVertical(center, 0.7), tol=tol, seed=cfg.seed),
        "translation": check_infinitesimal_isometry(LeftTranslation.lattice(1, -2, 3), tol=tol, seed=cfg.seed),
    }
    control = check_infinitesimal_isometry(
        PointMap(lambda p: p * np.array([2.0, 1.0, 1.0])), tol=tol, seed=cfg.seed)
    result = {k: {"passed": c.passed, "max_residual": c.max_residual} for k, c in checks.items()}
    result["anisotropic_control"] = {"passed": control.passed, "max_residual": control.max_residual}
    return result, all(c.passed for c in checks.values()) and not control.passed


def run_iso_fixedpoint(cfg: RunConfig) -> tuple[dict, bool]:
    order = int(cfg.option("iso", "order", 4))
    center = GroupPoint.from_array(cfg.option("iso", "center", [0.0, 0.0, 0.0]), Model.SYMMETRIC)
    p = GroupPoint.from_array(cfg.option("iso", "point", [0.1, 0.05, 0.02]), Model.SYMMETRIC)
    H = FiniteGroupAction.cyclic_rotations(order, center)
    fp = fixed_point_center(H, p, "contraction", radius_bound=float(cfg.option("iso", "radius_bound", 1.0)))
    passed = (fp.max_displacement <= cfg.tolerances.get("fixedpoint", 1e-6)
              and fp.max_displacement_cc <= cfg.tolerances.get("fixedpoint_cc", 1e-4))
    return {"point": fp.point.to_array(), "max_displacement": fp.max_displacement,
            "max_displacement_cc": fp.max_displacement_cc, "orbit_diameter": fp.orbit_diameter,
            "radius": fp.radius, "order": order}, passed


def run_dirichlet_build(cfg: RunConfig):
    spec = DirichletSpec(GroupPoint.from_array(cfg.option("dirichlet", "base_point", [0.5, 0.5, 0.5])),
                         cfg.metric)
    if cfg.box is not None:
        grid = VoxelSet.lattice_grid(*cfg.box, cfg.resolution("dirichlet"), margin=0)
    else:
        grid = dirichlet_grid(spec, cfg.resolution("dirichlet"),
                              cfg.option("dirichlet", "half_width", [1.0, 1.0, 1.25]))
    F = dirichlet_cell(spec, grid)
    path = write_voxels(Path(cfg.out) / "dirichlet.hvox", F, {**F.meta, "config_hash": cfg.digest()})
    m = F.measure()
    passed = abs(m - 1) <= cfg.tolerances.get("dirichlet_measure", 0.05)
    return {"measure": m, "shape": list(F.shape), "dump": path.name, **F.meta}, passed


def _load_or_build(cfg: RunConfig, name: str, builder: Callable, input_path: str | None):
    path = Path(input_path) if input_path else Path(cfg.out) / f"{name}.hvox"
    if not path.exists():
        if input_path:
            raise click.UsageError(f"input {input_path} does not exist")
        builder(cfg)
    vs, meta = read_voxels(path)
    return vs, meta


def run_dirichlet_verify(cfg: RunConfig, input_path=None):
    F, _ = _load_or_build(cfg, "dirichlet", run_dirichlet_build, input_path)
    rep = verify_fundamental_set(F, seed=cfg.seed)
    return rep.to_dict(), rep.passed


def _system(cfg: RunConfig, meta: dict | None = None):
    """IFS from a dump's metadata when available, else from the config (canonical transversal by default)."""
    meta = meta or {}
    return build_ifs(meta.get("t", cfg.t), meta.get("reps", cfg.option("tile", "reps", None)))


def run_tile_build(cfg: RunConfig):
    sys = _system(cfg)
    if cfg.box is not None:
        grid = VoxelSet.lattice_grid(*cfg.box, cfg.resolution("tile"), margin=3)
    else:
        grid = tile_grid(sys, cfg.resolution("tile"))
    # the unit cube is a good start only for the canonical transversal; other
    # attractors can leave it, so start from their invariant box instead
    start = cfg.option("tile", "start", "cube" if cfg.option("tile", "reps", None) is None else "box")
    if start not in ("cube", "box"):
        raise click.UsageError(f"tile.start must be cube or box, got {start!r}")
    seed = cube_seed(grid) if start == "cube" else box_seed(grid, *sys.invariant_box())
    res = attractor_fixed_point(sys, seed, int(cfg.option("tile", "max_iter", 12)),
                                track_hausdorff=bool(cfg.option("tile", "hausdorff", True)))
    meta = {"t": cfg.t, "res": cfg.resolution("tile"), "reps": [list(r) for r in sys.reps],
            "config_hash": cfg.digest(), **res.to_dict()}
    path = write_voxels(Path(cfg.out) / "tile.hvox", res.voxels, meta)
    hist = res.hausdorff_history or [float("nan")] * res.iterations
    write_csv(Path(cfg.out) / "tile_history.csv", ["iteration", "symdiff", "hausdorff"],
              ((i + 1, a, b) for i, (a, b) in enumerate(zip(res.symdiff_history, hist))))
    passed = res.converged and abs(res.measure - 1) <= cfg.tolerances.get("measure", 0.02)
    return {**res.to_dict(), "dump": path.name}, passed


def run_tile_verify(cfg: RunConfig, input_path=None):
    Q, meta = _load_or_build(cfg, "tile", run_tile_build, input_path)
    sys = _system(cfg, meta)
    selfsim = verify_self_similarity(sys, Q, seed=cfg.seed)
    tiling = verify_tiling(Q, seed=cfg.seed)
    passed = (selfsim <= cfg.tolerances.get("selfsim", 0.02)
              and tiling.fraction_one >= 1 - cfg.tolerances.get("tiling", 0.01))
    return {"self_similarity_residual": selfsim, "tiling": tiling.to_dict(), "measure": Q.measure()}, passed


def run_mra_verify(cfg: RunConfig, input_path=None):
    Q, meta = _load_or_build(cfg, "tile", run_tile_build, input_path)
    sys = _system(cfg, meta)
    rep = mra_diagnostics(sys, Q, seed=cfg.seed)
    return rep.to_dict(), rep.passed


def run_mra_project(cfg: RunConfig, input_path=None):
    Q, meta = _load_or_build(cfg, "tile", run_tile_build, input_path)
    tf = default_test_functions()[0]
    levels = [int(j) for j in cfg.option("mra", "levels", [0, 1, 2])]
    projs = [project_onto_level(tf.func, j, Q, tf.window, tf.points, meta.get("t", cfg.t)) for j in levels]
    write_coefficients_csv(Path(cfg.out) / "mra_coefficients.csv", projs)
    errs = [p.l2_error for p in projs]
    return ({"levels": levels, "errors": errs, "coefficients": "mra_coefficients.csv"},
            all(a > b for a, b in zip(errs, errs[1:])))


PIPELINE = [
    ("group check", run_group_check),
    ("dist pair", run_dist_pair),
    ("dist estimate", run_dist_estimate),
    ("iso verify", run_iso_verify),
    ("iso fixedpoint", run_iso_fixedpoint),
    ("dirichlet build", run_dirichlet_build),
    ("dirichlet verify", run_dirichlet_verify),
    ("tile build", run_tile_build),
    ("tile verify", run_tile_verify),
    ("mra verify", run_mra_verify),
    ("mra project", run_mra_project),
]


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------

def common_options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML or JSON config."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
        click.option("--seed", type=int, help="Random seed (u64)."),
        click.option("--res", type=int, help="Cells per unit length, 32..512."),
        click.option("--t", "t", type=float, help="Dilation parameter, 1/t an integer."),
        click.option("--metric", type=click.Choice(["cc", "contraction"]), help="Distance for metric steps."),
        click.option("--threads", type=int, help="Worker threads for numerical kernels."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _execute(name: str, runner: Callable, flags: dict, **kwargs):
    cfg = make_config(name, flags.pop("config_path", None), **flags)
    threads = cfg.threads or os.cpu_count() or 1
    try:
        with threadpool_limits(threads):
            result, passed = runner(cfg, **kwargs)
    except click.UsageError:
        raise
    except Exception as exc:  # module errors propagate with context
        click.echo(f"error: {name}: {type(exc).__name__}: {exc}", err=True)
        raise SystemExit(1) from exc
    path = write_report(cfg, name, result, passed)
    click.echo(f"{name}: {'pass' if passed else 'FAIL'} ({path})")
    raise SystemExit(0 if passed else 1)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="heisenmra")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose):
    """Heisenberg-group geometry, self-similar tiles and Haar MRA diagnostics."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.group()
def group():
    """Group-law checks."""


@group.command("check")
@common_options
def group_check(**flags):
    """Axioms, conversion homomorphism, commutator identity."""
    _execute("group check", run_group_check, flags)


@main.group()
def dist():
    """Distance solvers."""


@dist.command("pair")
@click.option("--p", "p", default="0,0,0", show_default=True, help="First point x,y,z (polarized).")
@click.option("--q", "q", default="1,0,0", show_default=True, help="Second point x,y,z (polarized).")
@common_options
def dist_pair(p, q, **flags):
    """Shooting distance cross-checked against the control oracle."""
    _execute("dist pair", run_dist_pair, flags, p=_point(p), q=_point(q))


@dist.command("estimate")
@common_options
def dist_estimate(**flags):
    """Fit c in d <= c d_R^(1/2) on random pairs of the unit box."""
    _execute("dist estimate", run_dist_estimate, flags)


@main.group()
def iso():
    """Isometries and fixed points."""


@iso.command("verify")
@common_options
def iso_verify(**flags):
    """Infinitesimal isometry test with an anisotropic negative control."""
    _execute("iso verify", run_iso_verify, flags)


@iso.command("fixedpoint")
@common_options
def iso_fixedpoint(**flags):
    """Common fixed point of a finite rotation group."""
    _execute("iso fixedpoint", run_iso_fixedpoint, flags)


@main.group()
def dirichlet():
    """Dirichlet fundamental domains."""


@dirichlet.command("build")
@common_options
def dirichlet_build(**flags):
    """Voxel Dirichlet cell; writes dirichlet.hvox."""
    _execute("dirichlet build", run_dirichlet_build, flags)


@dirichlet.command("verify")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Voxel dump to check.")
@common_options
def dirichlet_verify(input_path, **flags):
    """Closure, covering and overlap of a fundamental set."""
    _execute("dirichlet verify", run_dirichlet_verify, flags, input_path=input_path)


@main.group()
def tile():
    """Self-similar tiles."""


@tile.command("build")
@common_options
def tile_build(**flags):
    """Attractor by set iteration; writes tile.hvox and tile_history.csv."""
    _execute("tile build", run_tile_build, flags)


@tile.command("verify")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Tile dump to check.")
@common_options
def tile_verify(input_path, **flags):
    """Self-similarity residual and lattice tiling multiplicity."""
    _execute("tile verify", run_tile_verify, flags, input_path=input_path)


@main.group()
def mra():
    """Haar multiresolution analysis."""


@mra.command("verify")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Tile dump to use.")
@common_options
def mra_verify(input_path, **flags):
    """Per-axiom MRA diagnostics."""
    _execute("mra verify", run_mra_verify, flags, input_path=input_path)


@mra.command("project")
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="Tile dump to use.")
@common_options
def mra_project(input_path, **flags):
    """Project a Gaussian onto several levels; writes mra_coefficients.csv."""
    _execute("mra project", run_mra_project, flags, input_path=input_path)


@main.command("all")
@common_options
def run_all(**flags):
    """Run every pipeline in order from one config."""
    cfg = make_config("all", flags.pop("config_path", None), **flags)
    threads = cfg.threads or os.cpu_count() or 1
    summary = {}
    with threadpool_limits(threads):
        for name, runner in PIPELINE:
            try:
                result, passed = runner(cfg)
            except Exception as exc:
                result, passed = {"error": f"{type(exc).__name__}: {exc}"}, False
            write_report(cfg, name, result, passed)
            summary[name] = passed
            click.echo(f"{name}: {'pass' if passed else 'FAIL'}")
    write_report(cfg, "all", summary, all(summary.values()))
    raise SystemExit(0 if all(summary.values()) else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
