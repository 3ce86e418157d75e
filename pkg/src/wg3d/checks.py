"""Invariant battery behind ``wg3d selftest``.

Each check returns a :class:`CheckResult`; nothing here raises on a
numerical failure, so the whole battery always reports.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import element
from .mesh import ElementGeom, graded, perturbed_random, uniform
from .problems import Problem, _stack, _tensor
from .quadrature import face_average, project_cell_gradient
from .solver import cg_solve, dense_solve
from .study import solve
from .system import assemble, assemble_dense

__all__ = ["CheckResult", "linear_problem", "random_box", "random_cubic", "run_all", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: worst {self.worst:.3e} (tol {self.tol:.0e}){'  ' + self.detail if self.detail else ''}"


def linear_problem(a0: float, a: tuple[float, float, float], name: str = "linear") -> Problem:
    """Problem with ``u = a0 + a . x``, identity A and zero source."""
    a = np.asarray(a, dtype=float)

    def u(x, y, z):
        return a0 + a[0] * x + a[1] * y + a[2] * z

    def grad(x, y, z):
        shape = np.broadcast(x, y, z).shape
        return np.broadcast_to(a, shape + (3,)).copy()

    def hess(x, y, z):
        return np.zeros(np.broadcast(x, y, z).shape + (3, 3))

    return Problem(name, u, grad, hess)


PATCH_FUNCTIONS = {
    "1": (1.0, (0.0, 0.0, 0.0)),
    "x": (0.0, (1.0, 0.0, 0.0)),
    "y": (0.0, (0.0, 1.0, 0.0)),
    "z": (0.0, (0.0, 0.0, 1.0)),
    "2x-3y+z": (0.0, (2.0, -3.0, 1.0)),
}


def random_box(rng: np.random.Generator) -> ElementGeom:
    lo = rng.uniform(-1.0, 1.0, 3)
    e = rng.uniform(0.05, 2.0, 3)
    return ElementGeom((0, 0, 0), lo, lo + e, tuple(range(6)))


_CUBIC_EXPONENTS = [p for p in itertools.product(range(4), repeat=3) if sum(p) <= 3]


def random_cubic(rng: np.random.Generator):
    """A random polynomial of total degree 3 and its gradient."""
    coef = rng.standard_normal(len(_CUBIC_EXPONENTS))

    def w(x, y, z):
        return sum(c * x**a * y**b * z**d for c, (a, b, d) in zip(coef, _CUBIC_EXPONENTS))

    def grad(x, y, z):
        gx = sum(c * a * x ** max(a - 1, 0) * y**b * z**d for c, (a, b, d) in zip(coef, _CUBIC_EXPONENTS))
        gy = sum(c * b * x**a * y ** max(b - 1, 0) * z**d for c, (a, b, d) in zip(coef, _CUBIC_EXPONENTS))
        gz = sum(c * d * x**a * y**b * z ** max(d - 1, 0) for c, (a, b, d) in zip(coef, _CUBIC_EXPONENTS))
        return _stack(*(np.broadcast_to(g, np.broadcast(x, y, z).shape) for g in (gx, gy, gz)))

    return w, grad


def _face_values(fn, geom: ElementGeom, order: int = 4) -> np.ndarray:
    out = []
    for axis in range(3):
        for side in (geom.lo, geom.hi):
            lo, hi = geom.lo.copy(), geom.hi.copy()
            lo[axis] = hi[axis] = side[axis]
            out.append(face_average(fn, lo, hi, axis, order))
    return np.array(out)


def check_patch(tol: float = 1e-9) -> CheckResult:
    meshes = [uniform(2), graded(2, 3, 2, stretch=1.0), perturbed_random(3, seed=7)]
    worst, where = 0.0, ""
    for (label, (a0, a)), mesh, rho in itertools.product(PATCH_FUNCTIONS.items(), meshes, (0.01, 1.0, 6.0)):
        sol = solve(mesh, linear_problem(a0, a, label), rho=rho)
        w = max(sol.norms.as_tuple())
        if w > worst:
            worst, where = w, f"u={label}, mesh {mesh.shape}, rho={rho}"
    return CheckResult("patch test (linear u reproduced)", worst <= tol, worst, tol, where)


def check_a15(trials: int, rng: np.random.Generator, tol: float = 1e-12) -> CheckResult:
    """Area-weighted stabilizer rows on the minus faces sum to zero, and D pairs rows."""
    worst = 0.0
    for _ in range(trials):
        e = rng.uniform(0.05, 2.0, 3)
        v = rng.standard_normal(6)
        D = element.stabilizer_map(e)
        Dv = D @ v
        area = np.array([e[1] * e[2], e[0] * e[2], e[0] * e[1]])
        scale = max(np.abs(Dv).max(), np.abs(v).max())
        worst = max(worst, abs(area @ Dv[0::2]) / (area.sum() * scale),
                    np.abs(Dv[0::2] - Dv[1::2]).max() / scale)
    return CheckResult("stabilizer kernel and row pairing", worst <= tol, worst, tol)


def check_p1_reproduction(trials: int, rng: np.random.Generator, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        geom = random_box(rng)
        c = rng.standard_normal(4)
        v = c[0] + (geom.face_centers - geom.center) @ c[1:]
        S = element.extension_map(geom.e) @ v
        worst = max(worst, np.abs(S - c).max() / np.abs(c).max())
    return CheckResult("extension reproduces linears", worst <= tol, worst, tol)


def check_commutative(trials: int, rng: np.random.Generator, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        geom = random_box(rng)
        w, grad = random_cubic(rng)
        lhs = element.weak_gradient_map(geom.e) @ _face_values(w, geom)
        rhs = project_cell_gradient(grad, geom)
        worst = max(worst, np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1.0))
    return CheckResult("weak gradient commutes with projection (cubics)", worst <= tol, worst, tol)


def oracle_meshes():
    return [uniform(1), uniform(2), uniform(3), uniform(2, 3, 2), graded(3, 2, 3, stretch=1.0),
            perturbed_random(3, seed=3)]


def check_dense_oracle(tol_matrix: float = 1e-14, tol_solve: float = 1e-10) -> list[CheckResult]:
    from .problems import catalog

    worst_A, worst_x = 0.0, 0.0
    for mesh, (case, rho) in itertools.product(oracle_meshes(), [(1, 6.0), (4, 1.0), (9, 1.0), (8, 0.5)]):
        prob = catalog(case)
        sysm = assemble(mesh, prob, rho=rho)
        A, rhs, _ = assemble_dense(mesh, prob, rho=rho)
        scale = max(np.abs(A).max(), 1.0) if A.size else 1.0
        if A.size:
            worst_A = max(worst_A, np.abs(sysm.A.toarray() - A).max() / scale,
                          np.abs(sysm.rhs - rhs).max() / max(np.abs(rhs).max(), 1.0))
        if sysm.n:
            x, _ = cg_solve(sysm, tol=1e-14, max_iter=10 * sysm.n + 100)
            y = dense_solve(A, rhs)
            worst_x = max(worst_x, np.abs(x - y).max() / max(np.abs(y).max(), 1.0))
    return [
        CheckResult("sparse assembly equals dense loops", worst_A <= tol_matrix, worst_A, tol_matrix),
        CheckResult("CG equals dense Cholesky", worst_x <= tol_solve, worst_x, tol_solve),
    ]


def run_all(trials: int = 1000, seed: int = 20240611) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_patch(),
        check_a15(trials, rng),
        check_p1_reproduction(trials, rng),
        check_commutative(trials, rng),
        *check_dense_oracle(),
    ]


CHECKS = ("patch", "a15", "p1", "commutative", "oracle")
