"""Tensor-product hexahedral partitions of the unit cube.

Faces are numbered x-faces first, then y-faces, then z-faces.  Within a kind
the numbering is lexicographic in (i, j, s) with the last index fastest.
Elements are numbered the same way over (i, j, s) in ``n x m x q``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "HDef",
    "TensorMesh",
    "ElementGeom",
    "uniform",
    "perturbed_random",
    "graded",
    "mesh_size",
    "parse_mesh_spec",
    "OUTWARD_NORMALS",
]

OUTWARD_NORMALS = np.array(
    [
        [-1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
    ]
)


class HDef(enum.Enum):
    MAX_EDGE = "max"
    DIAGONAL = "diag"

    @classmethod
    def parse(cls, value: "str | HDef") -> "HDef":
        if isinstance(value, HDef):
            return value
        key = value.strip().lower()
        aliases = {"max": cls.MAX_EDGE, "maxedge": cls.MAX_EDGE, "max_edge": cls.MAX_EDGE,
                   "diag": cls.DIAGONAL, "diagonal": cls.DIAGONAL}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown h definition {value!r}; use 'max' or 'diag'") from None


def _check_breakpoints(name: str, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 1 or pts.size < 2:
        raise ValueError(f"{name}: need at least two breakpoints")
    if pts[0] != 0.0 or pts[-1] != 1.0:
        raise ValueError(f"{name}: breakpoints must start at 0 and end at 1")
    if np.any(np.diff(pts) <= 0.0):
        raise ValueError(f"{name}: breakpoints must be strictly increasing")
    pts = pts.copy()
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True)
class ElementGeom:
    """Geometry of one box element ``[lo, hi]``."""

    index: tuple[int, int, int]
    lo: np.ndarray
    hi: np.ndarray
    face_ids: tuple[int, ...]

    @property
    def e(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.e))

    @property
    def face_areas(self) -> np.ndarray:
        ex, ey, ez = self.e
        return np.array([ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def face_centers(self) -> np.ndarray:
        c = np.tile(self.center, (6, 1))
        for axis in range(3):
            c[2 * axis, axis] = self.lo[axis]
            c[2 * axis + 1, axis] = self.hi[axis]
        return c


@dataclass(frozen=True, eq=False)
class TensorMesh:
    """Cartesian product of three partitions of [0, 1].

    The mesh is immutable; every derived array is computed lazily once.
    """

    xs: np.ndarray
    ys: np.ndarray
    zs: np.ndarray
    h_def: HDef = HDef.MAX_EDGE
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "xs", _check_breakpoints("xs", self.xs))
        object.__setattr__(self, "ys", _check_breakpoints("ys", self.ys))
        object.__setattr__(self, "zs", _check_breakpoints("zs", self.zs))
        object.__setattr__(self, "h_def", HDef.parse(self.h_def))

    def with_h_def(self, h_def: "HDef | str") -> "TensorMesh":
        return TensorMesh(self.xs, self.ys, self.zs, HDef.parse(h_def), self.label)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.xs.size - 1, self.ys.size - 1, self.zs.size - 1)

    @property
    def element_count(self) -> int:
        n, m, q = self.shape
        return n * m * q

    @property
    def face_counts(self) -> tuple[int, int, int]:
        n, m, q = self.shape
        return ((n + 1) * m * q, n * (m + 1) * q, n * m * (q + 1))

    @property
    def face_count(self) -> int:
        return sum(self.face_counts)

    @property
    def h(self) -> float:
        return mesh_size(self)

    # -- indexing ---------------------------------------------------------

    def face_index(self, axis: int, i: int, j: int, s: int) -> int:
        """Global id of the face normal to ``axis`` with lower-corner index (i, j, s)."""
        n, m, q = self.shape
        dims = [n, m, q]
        dims[axis] += 1
        if axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
        for idx, d in zip((i, j, s), dims):
            if not 0 <= idx < d:
                raise IndexError(f"face index {(i, j, s)} out of range for axis {axis} with shape {tuple(dims)}")
        offset = sum(self.face_counts[:axis])
        return offset + (i * dims[1] + j) * dims[2] + s

    def element_geom(self, i: int, j: int, s: int) -> ElementGeom:
        n, m, q = self.shape
        if not (0 <= i < n and 0 <= j < m and 0 <= s < q):
            raise IndexError(f"element index {(i, j, s)} out of range for shape {(n, m, q)}")
        lo = np.array([self.xs[i], self.ys[j], self.zs[s]])
        hi = np.array([self.xs[i + 1], self.ys[j + 1], self.zs[s + 1]])
        ids = (
            self.face_index(0, i, j, s),
            self.face_index(0, i + 1, j, s),
            self.face_index(1, i, j, s),
            self.face_index(1, i, j + 1, s),
            self.face_index(2, i, j, s),
            self.face_index(2, i, j, s + 1),
        )
        return ElementGeom((i, j, s), lo, hi, ids)

    def iter_elements(self):
        n, m, q = self.shape
        for i in range(n):
            for j in range(m):
                for s in range(q):
                    yield self.element_geom(i, j, s)

    def is_boundary(self, face_id: int) -> bool:
        if not 0 <= face_id < self.face_count:
            raise IndexError(f"face id {face_id} out of range [0, {self.face_count})")
        return bool(self.boundary_mask[face_id])

    # -- vectorized element data -------------------------------------------

    @cached_property
    def element_lo(self) -> np.ndarray:
        X, Y, Z = np.meshgrid(self.xs[:-1], self.ys[:-1], self.zs[:-1], indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    @cached_property
    def element_e(self) -> np.ndarray:
        X, Y, Z = np.meshgrid(np.diff(self.xs), np.diff(self.ys), np.diff(self.zs), indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    @property
    def element_center(self) -> np.ndarray:
        return self.element_lo + 0.5 * self.element_e

    @property
    def element_volume(self) -> np.ndarray:
        return np.prod(self.element_e, axis=1)

    @property
    def element_face_areas(self) -> np.ndarray:
        ex, ey, ez = self.element_e.T
        return np.stack([ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey], axis=1)

    @cached_property
    def element_faces(self) -> np.ndarray:
        """(E, 6) global face ids in the order x-, x+, y-, y+, z-, z+."""
        n, m, q = self.shape
        I, J, S = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(m), np.arange(q), indexing="ij"))
        ox, oy, oz = 0, self.face_counts[0], self.face_counts[0] + self.face_counts[1]
        fx = lambda i, j, s: ox + (i * m + j) * q + s
        fy = lambda i, j, s: oy + (i * (m + 1) + j) * q + s
        fz = lambda i, j, s: oz + (i * m + j) * (q + 1) + s
        faces = np.stack(
            [fx(I, J, S), fx(I + 1, J, S), fy(I, J, S), fy(I, J + 1, S), fz(I, J, S), fz(I, J, S + 1)],
            axis=1,
        )
        faces.setflags(write=False)
        return faces

    # -- vectorized face data ----------------------------------------------

    @cached_property
    def _face_table(self) -> dict[str, np.ndarray]:
        n, m, q = self.shape
        axes, lo, hi, bnd = [], [], [], []
        pts = (self.xs, self.ys, self.zs)
        for axis in range(3):
            counts = [n, m, q]
            counts[axis] += 1
            idx = np.meshgrid(*(np.arange(c) for c in counts), indexing="ij")
            idx = [a.ravel() for a in idx]
            flo = np.empty((idx[0].size, 3))
            fhi = np.empty((idx[0].size, 3))
            for d in range(3):
                if d == axis:
                    flo[:, d] = fhi[:, d] = pts[d][idx[d]]
                else:
                    flo[:, d] = pts[d][idx[d]]
                    fhi[:, d] = pts[d][idx[d] + 1]
            on_bnd = (idx[axis] == 0) | (idx[axis] == counts[axis] - 1)
            axes.append(np.full(idx[0].size, axis))
            lo.append(flo)
            hi.append(fhi)
            bnd.append(on_bnd)
        table = {
            "axis": np.concatenate(axes),
            "lo": np.concatenate(lo),
            "hi": np.concatenate(hi),
            "boundary": np.concatenate(bnd),
        }
        for v in table.values():
            v.setflags(write=False)
        return table

    @property
    def face_axis(self) -> np.ndarray:
        return self._face_table["axis"]

    @property
    def face_lo(self) -> np.ndarray:
        return self._face_table["lo"]

    @property
    def face_hi(self) -> np.ndarray:
        return self._face_table["hi"]

    @property
    def face_center(self) -> np.ndarray:
        return 0.5 * (self.face_lo + self.face_hi)

    @property
    def boundary_mask(self) -> np.ndarray:
        return self._face_table["boundary"]

    @cached_property
    def face_element(self) -> np.ndarray:
        """(F,) one adjacent element per face (the unique one on the boundary)."""
        owner = np.empty(self.face_count, dtype=np.int64)
        elems = np.arange(self.element_count)
        for p in range(6):
            owner[self.element_faces[:, p]] = elems
        return owner

    def __repr__(self) -> str:
        n, m, q = self.shape
        tag = f" {self.label}" if self.label else ""
        return f"TensorMesh({n}x{m}x{q}, h_def={self.h_def.value}{tag})"


def uniform(n: int, m: int | None = None, q: int | None = None, h_def: HDef | str = HDef.MAX_EDGE) -> TensorMesh:
    m = n if m is None else m
    q = n if q is None else q
    for c in (n, m, q):
        if int(c) != c or c < 1:
            raise ValueError(f"element counts must be positive integers, got {(n, m, q)}")
    pts = [np.arange(c + 1) / c for c in (n, m, q)]
    return TensorMesh(*pts, h_def=h_def, label=f"uniform:{n}x{m}x{q}")


def perturbed_random(n: int, seed: int = 0, amplitude: float = 0.2, h_def: HDef | str = HDef.MAX_EDGE) -> TensorMesh:
    """Uniform ``n^3`` mesh with each interior breakpoint moved by ``amplitude*(u-0.5)/n``.

    ``u`` is drawn independently per breakpoint and per direction from a
    seeded ``numpy.random.default_rng``.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"perturbed_random needs n >= 2, got {n}")
    if not 0.0 <= amplitude < 1.0:
        raise ValueError(f"amplitude must lie in [0, 1), got {amplitude}")
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(3):
        base = np.arange(n + 1) / n
        u = rng.random(n - 1)
        base[1:-1] += amplitude * (u - 0.5) / n
        pts.append(base)
    return TensorMesh(*pts, h_def=h_def, label=f"random:{n}:seed={seed}:amp={amplitude:g}")


def _graded_points(count: int, stretch: float) -> np.ndarray:
    t = np.arange(count + 1) / count
    if abs(stretch) < 1e-12:
        return t
    pts = np.expm1(stretch * t) / np.expm1(stretch)
    pts[0], pts[-1] = 0.0, 1.0
    return pts


def graded(n: int, m: int | None = None, q: int | None = None, stretch: float = 1.0,
           h_def: HDef | str = HDef.MAX_EDGE) -> TensorMesh:
    """Breakpoints ``phi(i/n)`` with ``phi(t) = (exp(stretch*t) - 1) / (exp(stretch) - 1)``."""
    m = n if m is None else m
    q = n if q is None else q
    for c in (n, m, q):
        if int(c) != c or c < 1:
            raise ValueError(f"element counts must be positive integers, got {(n, m, q)}")
    if stretch < 0:
        raise ValueError(f"stretch must be non-negative, got {stretch}")
    pts = [_graded_points(c, stretch) for c in (n, m, q)]
    return TensorMesh(*pts, h_def=h_def, label=f"graded:{n}x{m}x{q}:stretch={stretch:g}")


def mesh_size(mesh: TensorMesh, h_def: HDef | str | None = None) -> float:
    h_def = mesh.h_def if h_def is None else HDef.parse(h_def)
    e = mesh.element_e
    if h_def is HDef.MAX_EDGE:
        return float(e.max())
    return float(np.sqrt((e ** 2).sum(axis=1)).max())


_SPEC_RE = re.compile(r"^(uniform|graded|random)(?::(.*))?$")


def _parse_counts(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"bad element counts {text!r}; expected NxMxQ")
    return tuple(int(p) for p in parts)


def parse_mesh_spec(spec: str, refine: int = 1, h_def: HDef | str = HDef.MAX_EDGE) -> TensorMesh:
    """Build a mesh from strings like ``uniform:8x8x8``, ``graded:8x8x8:stretch=1.0``
    or ``random:8:seed=42:amp=0.2``; counts are multiplied by ``refine``."""
    match = _SPEC_RE.match(spec.strip())
    if not match:
        raise ValueError(f"unrecognised mesh spec {spec!r}")
    kind, rest = match.group(1), match.group(2) or ""
    fields = [f for f in rest.split(":") if f]
    if not fields:
        raise ValueError(f"mesh spec {spec!r} is missing element counts")
    counts = _parse_counts(fields[0])
    opts = {}
    for f in fields[1:]:
        key, sep, val = f.partition("=")
        if not sep:
            raise ValueError(f"bad mesh option {f!r} in {spec!r}")
        opts[key.strip().lower()] = val.strip()
    counts = tuple(c * refine for c in counts)
    if kind == "uniform":
        if opts:
            raise ValueError(f"uniform meshes take no options: {spec!r}")
        return uniform(*counts, h_def=h_def)
    if kind == "graded":
        unknown = set(opts) - {"stretch"}
        if unknown:
            raise ValueError(f"unknown graded option(s) {sorted(unknown)}")
        return graded(*counts, stretch=float(opts.get("stretch", 1.0)), h_def=h_def)
    unknown = set(opts) - {"seed", "amp"}
    if unknown:
        raise ValueError(f"unknown random option(s) {sorted(unknown)}")
    if len(set(counts)) != 1:
        raise ValueError("random meshes are N x N x N; give a single count")
    return perturbed_random(counts[0], seed=int(opts.get("seed", 0)),
                            amplitude=float(opts.get("amp", 0.2)), h_def=h_def)
