"""Lowest-order simplified weak Galerkin solver on tensor-product hexahedral meshes."""
from .analysis import ErrorNorms, StudyReport, error_norms, rates
from .mesh import HDef, TensorMesh, graded, mesh_size, parse_mesh_spec, perturbed_random, uniform
from .problems import Problem, catalog
from .solver import cg_solve, dense_solve
from .study import SolverSettings, run_study, solve
from .system import BoundaryMode, assemble, project_boundary

__version__ = "0.1.0"
