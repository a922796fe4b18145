"""Occupancy grids over axis-aligned boxes and their on-disk dump format.

A :class:`VoxelSet` stores one boolean per cell of a regular grid.  Points are
looked up by the cell that contains them, so the set represented is the union
of occupied cells.  Measure is cell count times cell volume (Lebesgue measure,
which is the Haar measure of the group in either coordinate model).

Dump layout (little endian)::

    offset  size  field
    0       4     magic  b"HVOX"
    4       2     format version (uint16) = 1
    6       1     model tag (uint8): 0 polarized, 1 symmetric
    7       1     reserved, zero
    8       48    box lower corner then upper corner, 6 x float64
    56      12    cells per axis nx, ny, nz, 3 x uint32
    68      8     occupied cell count (uint64)
    76      ...   occupancy bits, C order (x slowest), numpy.packbits bitorder="little"

A JSON sidecar ``<file>.json`` carries free-form metadata.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .heisenberg import Model, convert, mul, to_symmetric

MAGIC = b"HVOX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHBB6d3IQ")
_MODEL_TAGS = {Model.POLARIZED: 0, Model.SYMMETRIC: 1}


@dataclass
class VoxelSet:
    lo: np.ndarray
    spacing: np.ndarray
    occupancy: np.ndarray
    model: Model = Model.POLARIZED
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(3)
        self.spacing = np.asarray(self.spacing, dtype=float).reshape(3)
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        self.model = Model(self.model)
        if self.occupancy.ndim != 3:
            raise ValueError("occupancy must be a 3-d array")
        if np.any(self.spacing <= 0):
            raise ValueError("spacing must be positive")

    # -- construction -------------------------------------------------------
    @classmethod
    def empty_box(cls, lo, hi, shape, model=Model.POLARIZED) -> "VoxelSet":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        shape = tuple(int(s) for s in np.broadcast_to(shape, 3))
        return cls(lo, (hi - lo) / np.array(shape), np.zeros(shape, bool), model)

    @classmethod
    def lattice_grid(cls, lo, hi, res: int, margin: int = 2, model=Model.POLARIZED) -> "VoxelSet":
        """Empty grid with spacing 1/res whose cell centres lie on (1/res) Z^3.

        Integer left translations and dilations by integers map such centres to
        centres, so lookups of transformed centres are exact.
        """
        if res < 1:
            raise ValueError("res must be positive")
        h = 1.0 / res
        i0 = np.floor(np.asarray(lo, dtype=float) * res + 1e-9).astype(int) - margin
        i1 = np.ceil(np.asarray(hi, dtype=float) * res - 1e-9).astype(int) + margin
        shape = tuple(int(v) for v in i1 - i0 + 1)
        vs = cls((i0 - 0.5) * h, np.full(3, h), np.zeros(shape, bool), model)
        vs.meta["res"] = int(res)
        return vs

    @classmethod
    def from_predicate(cls, template: "VoxelSet", predicate) -> "VoxelSet":
        """Occupy cells whose centre satisfies ``predicate(points) -> bool array``."""
        pts = template.centers()
        occ = np.asarray(predicate(pts.reshape(-1, 3)), dtype=bool).reshape(template.shape)
        return template.with_occupancy(occ)

    def with_occupancy(self, occ) -> "VoxelSet":
        occ = np.asarray(occ, dtype=bool)
        if occ.shape != self.shape:
            raise ValueError("occupancy shape mismatch")
        return VoxelSet(self.lo.copy(), self.spacing.copy(), occ, self.model, dict(self.meta))

    # -- geometry -----------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.occupancy.shape

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.spacing * np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    def measure(self) -> float:
        return self.count * self.cell_volume

    def axes(self) -> list[np.ndarray]:
        return [self.lo[i] + (np.arange(self.shape[i]) + 0.5) * self.spacing[i] for i in range(3)]

    def centers(self, mask=None) -> np.ndarray:
        """Cell centres, full grid ``shape + (3,)`` or the rows selected by ``mask``."""
        if mask is None:
            return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)
        idx = np.nonzero(mask)
        return np.stack([self.lo[i] + (idx[i] + 0.5) * self.spacing[i] for i in range(3)], axis=-1)

    def index(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices of points and a mask of points inside the box."""
        pts = np.asarray(pts, dtype=float)
        idx = np.floor((pts - self.lo) / self.spacing).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=-1)
        return np.where(ok[..., None], idx, 0), ok

    def contains(self, pts) -> np.ndarray:
        idx, ok = self.index(pts)
        return ok & self.occupancy[idx[..., 0], idx[..., 1], idx[..., 2]]

    def same_grid(self, other: "VoxelSet") -> bool:
        return (self.shape == other.shape and np.allclose(self.lo, other.lo)
                and np.allclose(self.spacing, other.spacing))

    def symdiff_measure(self, other: "VoxelSet") -> float:
        if not self.same_grid(other):
            raise ValueError("voxel sets live on different grids")
        return np.count_nonzero(self.occupancy ^ other.occupancy) * self.cell_volume

    def dilate(self, layers: int = 1) -> "VoxelSet":
        if layers <= 0:
            return self.with_occupancy(self.occupancy.copy())
        st = ndimage.generate_binary_structure(3, 3)
        return self.with_occupancy(ndimage.binary_dilation(self.occupancy, st, iterations=layers))

    def erode(self, layers: int = 1) -> "VoxelSet":
        st = ndimage.generate_binary_structure(3, 3)
        return self.with_occupancy(ndimage.binary_erosion(self.occupancy, st, iterations=layers))

    def boundary(self) -> np.ndarray:
        st = ndimage.generate_binary_structure(3, 1)
        return self.occupancy & ~ndimage.binary_erosion(self.occupancy, st, border_value=0)

    def within_layers(self, other: "VoxelSet", layers: int) -> bool:
        """Each set lies inside the ``layers``-cell dilation of the other."""
        a, b = self.occupancy, other.occupancy
        return bool(np.all(~a | other.dilate(layers).occupancy)
                    and np.all(~b | self.dilate(layers).occupancy))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.argwhere(self.occupancy)
        if len(idx) == 0:
            raise ValueError("empty voxel set")
        return self.lo + idx.min(0) * self.spacing, self.lo + (idx.max(0) + 1) * self.spacing


# ---------------------------------------------------------------------------
# gauge Hausdorff distance
# ---------------------------------------------------------------------------

def _gauge(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Box gauge of p^-1 q in symmetric coordinates: max(|dx|, |dy|, 2 sqrt|dz|).

    Left-invariant and scaled exactly by t under the dilation by t.
    """
    d = q - p
    dz = d[..., 2] - 0.5 * (p[..., 0] * d[..., 1] - p[..., 1] * d[..., 0])
    return np.maximum(np.maximum(np.abs(d[..., 0]), np.abs(d[..., 1])), 2 * np.sqrt(np.abs(dz)))


def _directed_gauge(P: np.ndarray, T: np.ndarray, k: int = 16) -> float:
    """sup_{p in P} min_{q in T} gauge(p, q), both in symmetric coordinates."""
    if len(P) == 0:
        return 0.0
    if len(T) == 0:
        return float("inf")
    tree = cKDTree(T)
    k = min(k, len(T))
    _, nn = tree.query(P, k=k)
    nn = nn.reshape(len(P), k)
    upper = _gauge(P[:, None, :], T[nn]).min(axis=1)
    # a strided subsample of T tightens the bounds where Euclidean neighbours mislead
    sub = T[:: max(1, len(T) // 2000)]
    for lo in range(0, len(P), 256):
        blk = _gauge(P[lo:lo + 256, None, :], sub[None]).min(axis=1)
        upper[lo:lo + 256] = np.minimum(upper[lo:lo + 256], blk)
    order = np.argsort(-upper)
    best = 0.0
    for i in order:
        u = upper[i]
        if u <= best:
            break
        p = P[i]
        w = 0.25 * u * u + 0.5 * (abs(p[0]) + abs(p[1])) * u
        cand = tree.query_ball_point(p, np.sqrt(2 * u * u + w * w))
        exact = min(u, float(_gauge(p[None], T[cand]).min())) if cand else u
        best = max(best, exact)
    return best


def gauge_hausdorff(a: VoxelSet, b: VoxelSet, max_points: int = 2000) -> float:
    """Hausdorff distance between two voxel sets in the left-invariant box gauge.

    Only cells in the symmetric difference can realise the supremum, and their
    nearest partner in the other set lies on its boundary.  At most
    ``max_points`` difference cells are used per direction (evenly strided).
    """
    if not a.same_grid(b):
        raise ValueError("voxel sets live on different grids")
    out = 0.0
    for x, y in ((a, b), (b, a)):
        diff = x.occupancy & ~y.occupancy
        if not diff.any():
            continue
        if not y.occupancy.any():
            return float("inf")
        P = x.centers(diff)
        if len(P) > max_points:
            P = P[np.linspace(0, len(P) - 1, max_points).astype(int)]
        T = y.centers(y.boundary())
        if x.model is Model.POLARIZED:
            P, T = to_symmetric(P), to_symmetric(T)
        # left-translate to the centre of the box: the gauge is unchanged and the
        # shear term in the candidate search shrinks
        c = -0.5 * (x.lo + x.hi)
        c[2] = 0.0
        P, T = mul(c, P, Model.SYMMETRIC), mul(c, T, Model.SYMMETRIC)
        out = max(out, _directed_gauge(P, T))
    return out


# ---------------------------------------------------------------------------
# dump format
# ---------------------------------------------------------------------------

def write_voxels(path, vs: VoxelSet, metadata: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, _MODEL_TAGS[vs.model], 0,
                          *vs.lo.tolist(), *vs.hi.tolist(), *map(int, vs.shape), vs.count)
    bits = np.packbits(vs.occupancy.ravel(order="C"), bitorder="little")
    path.write_bytes(header + bits.tobytes())
    side = {"format_version": FORMAT_VERSION, **(metadata or {})}
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True, default=_json_default))
    return path


def read_voxels(path) -> tuple[VoxelSet, dict]:
    path = Path(path)
    raw = path.read_bytes()
    magic, version, tag, _, *rest = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path} is not a voxel dump")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported voxel dump version {version}")
    lo, hi = np.array(rest[0:3]), np.array(rest[3:6])
    shape = tuple(rest[6:9])
    count = rest[9]
    n = int(np.prod(shape))
    bits = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
    occ = np.unpackbits(bits, count=n, bitorder="little").astype(bool).reshape(shape)
    if int(occ.sum()) != count:
        raise ValueError("voxel dump count does not match its bitmap")
    model = {v: k for k, v in _MODEL_TAGS.items()}[tag]
    vs = VoxelSet(lo, (hi - lo) / np.array(shape), occ, model)
    side = Path(str(path) + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    if "res" in meta:
        vs.meta["res"] = meta["res"]
    return vs, meta


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Model):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def convert_points(pts, source, target):
    return convert(pts, source, target)
