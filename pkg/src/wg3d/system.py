"""Global assembly of the face-unknown system and Dirichlet data."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import element
from .mesh import OUTWARD_NORMALS, TensorMesh, mesh_size
from .problems import Problem
from .quadrature import DEFAULT_ORDER, cell_averages, element_moments, face_averages, integrate_box

__all__ = [
    "BoundaryMode",
    "DofMap",
    "SparseSystem",
    "project_boundary",
    "assemble",
    "assemble_dense",
    "element_matrices",
    "write_matrix_market",
]


class BoundaryMode(enum.Enum):
    L2 = "l2"
    PERTURBED = "perturbed"

    @classmethod
    def parse(cls, value: "str | BoundaryMode") -> "BoundaryMode":
        if isinstance(value, BoundaryMode):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown boundary mode {value!r}; use 'l2' or 'perturbed'") from None


@dataclass(frozen=True)
class DofMap:
    """Interior faces carry unknowns ``0..N-1`` in face-id order; boundary
    faces carry prescribed values."""

    face_count: int
    interior_faces: np.ndarray
    boundary_faces: np.ndarray
    boundary_values: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.interior_faces.size

    def dof_of_face(self) -> np.ndarray:
        out = np.full(self.face_count, -1, dtype=np.int64)
        out[self.interior_faces] = np.arange(self.n_dofs)
        return out

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Full face field from interior unknowns plus prescribed boundary values."""
        u = np.empty(self.face_count)
        u[self.interior_faces] = x
        u[self.boundary_faces] = self.boundary_values
        return u


@dataclass(frozen=True)
class SparseSystem:
    A: sp.csr_matrix
    rhs: np.ndarray
    dof_map: DofMap

    @property
    def n(self) -> int:
        return self.rhs.size


def project_boundary(problem: Problem, mesh: TensorMesh, mode="l2", rho: float = 1.0,
                     h: float | None = None, order: int = DEFAULT_ORDER,
                     curvature: str = "center") -> np.ndarray:
    """Prescribed values on ``mesh``'s boundary faces, in face-id order.

    ``perturbed`` adds to each face mean of g the correction
    ``(1/12) sum_t e_t (e_t - 6 h a_tt / rho) g_tt`` over the two tangential
    directions ``t``; it is only defined for diagonal A.  ``g_tt`` and
    ``a_tt`` are taken at the face centre (``curvature="center"``) or as
    face means (``curvature="mean"``).  The two differ by O(h^4) per face.
    """
    mode = BoundaryMode.parse(mode)
    faces = np.flatnonzero(mesh.boundary_mask)
    values = face_averages(problem.g, mesh, order, faces)
    if mode is BoundaryMode.L2:
        return values
    if not problem.diagonal_A:
        raise ValueError(
            f"perturbed boundary projection needs a diagonal diffusion tensor; problem {problem.name!r} "
            "has off-diagonal entries (use --boundary l2)"
        )
    if rho <= 0:
        raise ValueError("rho must be positive")
    if curvature not in ("center", "mean"):
        raise ValueError(f"curvature must be 'center' or 'mean', got {curvature!r}")
    h = mesh_size(mesh) if h is None else h
    axis = mesh.face_axis[faces]
    ext = mesh.face_hi[faces] - mesh.face_lo[faces]
    centers = mesh.face_center[faces]
    corr = np.zeros(faces.size)
    for t in range(3):
        on = axis != t
        if not np.any(on):
            continue
        if curvature == "center":
            x, y, z = centers[on].T
            g_tt = problem.hess_u(x, y, z)[..., t, t]
            a_tt = problem.A(x, y, z)[..., t, t]
        else:
            sel = faces[on]
            g_tt = face_averages(lambda x, y, z: problem.hess_u(x, y, z)[..., t, t], mesh, order, sel)
            a_tt = face_averages(lambda x, y, z: problem.A(x, y, z)[..., t, t], mesh, order, sel)
        e_t = ext[on, t]
        corr[on] += e_t * (e_t - h * (6.0 * a_tt / rho)) * g_tt
    return values + corr / 12.0


def element_matrices(mesh: TensorMesh, problem: Problem, rho: float, h: float,
                     order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Stacked element stiffness blocks ``(E, 6, 6)`` and loads ``(E, 6)``."""
    e = mesh.element_e
    A_bar = cell_averages(problem.A, mesh, order)
    K = element.stiffness(e, A_bar, rho, h)
    if problem.c != 0.0:
        K = K + element.reaction_mass(e, problem.c)
    m = element_moments(problem.f, mesh.element_lo, e, order)
    b = element.load(e, m)
    return K, b


def _split(mesh: TensorMesh, problem: Problem, mode, rho, h, order) -> DofMap:
    interior = np.flatnonzero(~mesh.boundary_mask)
    boundary = np.flatnonzero(mesh.boundary_mask)
    values = project_boundary(problem, mesh, mode, rho, h, order)
    return DofMap(mesh.face_count, interior, boundary, values)


def assemble(mesh: TensorMesh, problem: Problem, rho: float = 1.0, h: float | None = None,
             mode="l2", order: int = DEFAULT_ORDER) -> SparseSystem:
    """Sparse SPD system in the interior face unknowns.

    Boundary values are eliminated into the right-hand side.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    problem.check_mesh(mesh)
    h = mesh_size(mesh) if h is None else h
    K, b = element_matrices(mesh, problem, rho, h, order)
    faces = mesh.element_faces
    F = mesh.face_count
    rows = np.repeat(faces, 6, axis=1).ravel()
    cols = np.tile(faces, (1, 6)).ravel()
    full = sp.coo_matrix((K.ravel(), (rows, cols)), shape=(F, F)).tocsr()
    full.sum_duplicates()
    load_full = np.bincount(faces.ravel(), weights=b.ravel(), minlength=F)

    dofs = _split(mesh, problem, mode, rho, h, order)
    inner = full[dofs.interior_faces]
    A = inner[:, dofs.interior_faces].tocsr()
    A.sort_indices()
    rhs = load_full[dofs.interior_faces] - inner[:, dofs.boundary_faces] @ dofs.boundary_values
    return SparseSystem(A, rhs, dofs)


# -- brute-force dense oracle --------------------------------------------


def _oracle_element(geom, A_bar, rho, h, c, order):
    """Element block built from the defining relations, not the closed forms."""
    W = geom.face_areas
    M = geom.face_centers
    xc = geom.center
    vol = geom.volume
    # weak gradient from (grad_d v, psi)_T = <v, psi.n>_dT with psi constant
    G = (W[None, :] * OUTWARD_NORMALS.T) / vol
    # S(v) = c1 + c2 (x-xc) + ...: impose sum_p |F_p| (S - v)(M_p) psi(M_p) = 0 for psi in P1
    basis = np.column_stack([np.ones(6), M - xc])  # (6 faces, 4 basis) values at face centres
    lhs = basis.T @ (W[:, None] * basis)
    rhs = basis.T * W[None, :]
    C = np.linalg.solve(lhs, rhs)
    D = basis @ C - np.eye(6)
    K = np.zeros((6, 6))
    for a in range(6):
        for b in range(6):
            K[a, b] = vol * G[:, a] @ A_bar @ G[:, b] + (rho / h) * np.sum(W * D[:, a] * D[:, b])
    if c != 0.0:
        phis = [lambda x, y, z: np.ones_like(x), lambda x, y, z: x - xc[0],
                lambda x, y, z: y - xc[1], lambda x, y, z: z - xc[2]]
        mass = np.array([[integrate_box(lambda x, y, z: pa(x, y, z) * pb(x, y, z), geom, order)
                          for pb in phis] for pa in phis])
        K += c * C.T @ mass @ C
    return K, C


def assemble_dense(mesh: TensorMesh, problem: Problem, rho: float = 1.0, h: float | None = None,
                   mode="l2", order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray, DofMap]:
    """Dense reference assembly by explicit loops over elements and face pairs."""
    h = mesh_size(mesh) if h is None else h
    F = mesh.face_count
    big = np.zeros((F, F))
    load_full = np.zeros(F)
    for geom in mesh.iter_elements():
        A_bar = np.array([[integrate_box(lambda x, y, z, i=i, j=j: problem.A(x, y, z)[..., i, j], geom, order)
                           for j in range(3)] for i in range(3)]) / geom.volume
        K, C = _oracle_element(geom, A_bar, rho, h, problem.c, order)
        xc = geom.center
        m = np.array([
            integrate_box(problem.f, geom, order),
            integrate_box(lambda x, y, z: problem.f(x, y, z) * (x - xc[0]), geom, order),
            integrate_box(lambda x, y, z: problem.f(x, y, z) * (y - xc[1]), geom, order),
            integrate_box(lambda x, y, z: problem.f(x, y, z) * (z - xc[2]), geom, order),
        ])
        for a, fa in enumerate(geom.face_ids):
            load_full[fa] += C[:, a] @ m
            for b, fb in enumerate(geom.face_ids):
                big[fa, fb] += K[a, b]
    dofs = _split(mesh, problem, mode, rho, h, order)
    ii, bb = dofs.interior_faces, dofs.boundary_faces
    A = big[np.ix_(ii, ii)]
    rhs = load_full[ii] - big[np.ix_(ii, bb)] @ dofs.boundary_values
    return A, rhs, dofs


def write_matrix_market(system: SparseSystem, path) -> None:
    from scipy.io import mmwrite

    mmwrite(str(path), system.A, comment="simplified WG face system (interior faces)")
