"""Single solves and refinement studies."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .analysis import ErrorNorms, StudyReport, StudyRow, error_norms
from .mesh import HDef, TensorMesh, mesh_size, parse_mesh_spec
from .problems import Problem
from .quadrature import DEFAULT_ORDER
from .solver import SolveReport, cg_solve
from .system import BoundaryMode, assemble

__all__ = ["SolverSettings", "Solution", "solve", "run_study"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-12
    max_iter: int | None = None
    precond: str | None = "jacobi"


@dataclass
class Solution:
    mesh: TensorMesh
    u_b: np.ndarray
    norms: ErrorNorms
    report: SolveReport
    h: float
    dofs: int


def solve(mesh: TensorMesh, problem: Problem, rho: float = 1.0, boundary: BoundaryMode | str = "l2",
          order: int = DEFAULT_ORDER, solver: SolverSettings = SolverSettings()) -> Solution:
    h = mesh_size(mesh)
    system = assemble(mesh, problem, rho=rho, h=h, mode=boundary, order=order)
    if system.n == 0:
        log.info("%r has no interior faces; nothing to solve", mesh)
        x, report = np.zeros(0), SolveReport(0, 0.0, 0.0)
    else:
        x, report = cg_solve(system, tol=solver.tol, max_iter=solver.max_iter, precond=solver.precond)
    u_b = system.dof_map.expand(x)
    return Solution(mesh, u_b, error_norms(mesh, problem, u_b, order), report, h, system.n)


def run_study(problem: Problem, mesh_spec: str, levels: int = 4, refinement: int = 2, rho: float = 1.0,
              h_def: HDef | str = HDef.MAX_EDGE, boundary: BoundaryMode | str = "l2",
              order: int = DEFAULT_ORDER, solver: SolverSettings = SolverSettings(),
              on_row=None) -> StudyReport:
    """Solve on ``levels`` meshes, multiplying the element counts by ``refinement`` each time.

    ``on_row`` is called with each finished :class:`StudyRow`, so partial
    results survive a solver failure on a later level.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if refinement < 2 or int(refinement) != refinement:
        raise ValueError("refinement factor must be an integer >= 2")
    report = StudyReport(title=f"{problem.name}: rho={rho:g}, boundary={BoundaryMode.parse(boundary).value}, "
                               f"h={HDef.parse(h_def).value}, mesh={mesh_spec}")
    for level in range(levels):
        mesh = parse_mesh_spec(mesh_spec, refine=refinement ** level, h_def=h_def)
        sol = solve(mesh, problem, rho=rho, boundary=boundary, order=order, solver=solver)
        n, m, q = mesh.shape
        row = StudyRow(level, f"{n}x{m}x{q}", sol.h, sol.dofs, sol.norms, sol.report.iterations, sol.report.seconds)
        report.rows.append(row)
        log.info("level %d %s: h1_db=%.4e (%d CG iterations)", level, row.mesh, sol.norms.h1_db, row.iters)
        if on_row is not None:
            on_row(row)
    return report
