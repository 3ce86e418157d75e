"""Manufactured test problems ``-div(A grad u) + c u = f`` on the unit cube.

Each problem carries its exact solution with gradient and Hessian, the
diffusion tensor and the row-divergence of that tensor.  The source term is
assembled from these pieces, so a problem is fully described by hand-coded
derivatives; :func:`consistency_residual` checks them against finite
differences.
"""
from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = ["Problem", "catalog", "CASE_IDS", "consistency_residual", "load_problem_file", "problem_from_expressions"]

Field = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
pi = np.pi


def _stack(*comps):
    comps = np.broadcast_arrays(*comps)
    return np.stack(comps, axis=-1)


def _tensor(rows):
    return np.stack([_stack(*r) for r in rows], axis=-2)


def _identity(x, y, z):
    shape = np.broadcast(x, y, z).shape
    return np.broadcast_to(np.eye(3), shape + (3, 3)).copy()


def _zero_vec(x, y, z):
    return np.zeros(np.broadcast(x, y, z).shape + (3,))


@dataclass(frozen=True)
class Problem:
    name: str
    u: Field
    grad_u: Field
    hess_u: Field
    A: Field = _identity
    div_A: Field = _zero_vec
    c: float = 0.0
    diagonal_A: bool = True
    description: str = ""
    # x-positions where A jumps; meshes must put a breakpoint there
    interfaces_x: tuple[float, ...] = field(default=())

    def f(self, x, y, z):
        A = self.A(x, y, z)
        g = self.grad_u(x, y, z)
        H = self.hess_u(x, y, z)
        div_flux = np.einsum("...j,...j->...", self.div_A(x, y, z), g) + np.einsum("...ij,...ij->...", A, H)
        return -div_flux + self.c * self.u(x, y, z)

    def flux(self, x, y, z):
        return np.einsum("...ij,...j->...i", self.A(x, y, z), self.grad_u(x, y, z))

    def g(self, x, y, z):
        return self.u(x, y, z)

    def check_mesh(self, mesh) -> None:
        for xi in self.interfaces_x:
            if not np.any(np.isclose(mesh.xs, xi, rtol=0, atol=1e-13)):
                raise ValueError(
                    f"problem {self.name!r} has a coefficient jump at x={xi}; the mesh must have a breakpoint there"
                )


# -- the catalog ----------------------------------------------------------


def _case1():
    def u(x, y, z):
        return np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z)

    def grad(x, y, z):
        sx, sy, sz = np.sin(pi * x), np.sin(pi * y), np.sin(pi * z)
        cx, cy, cz = np.cos(pi * x), np.cos(pi * y), np.cos(pi * z)
        return pi * _stack(cx * sy * sz, sx * cy * sz, sx * sy * cz)

    def hess(x, y, z):
        sx, sy, sz = np.sin(pi * x), np.sin(pi * y), np.sin(pi * z)
        cx, cy, cz = np.cos(pi * x), np.cos(pi * y), np.cos(pi * z)
        p2 = pi * pi
        return p2 * _tensor([
            [-sx * sy * sz, cx * cy * sz, cx * sy * cz],
            [cx * cy * sz, -sx * sy * sz, sx * cy * cz],
            [cx * sy * cz, sx * cy * cz, -sx * sy * sz],
        ])

    return Problem("case1", u, grad, hess, description="u = sin(pi x) sin(pi y) sin(pi z), A = I")


def _case2():
    def u(x, y, z):
        return np.cos(x) * np.sin(y) * np.cos(z)

    def grad(x, y, z):
        return _stack(-np.sin(x) * np.sin(y) * np.cos(z), np.cos(x) * np.cos(y) * np.cos(z),
                      -np.cos(x) * np.sin(y) * np.sin(z))

    def hess(x, y, z):
        sx, sy, sz = np.sin(x), np.sin(y), np.sin(z)
        cx, cy, cz = np.cos(x), np.cos(y), np.cos(z)
        return _tensor([
            [-cx * sy * cz, -sx * cy * cz, sx * sy * sz],
            [-sx * cy * cz, -cx * sy * cz, -cx * cy * sz],
            [sx * sy * sz, -cx * cy * sz, -cx * sy * cz],
        ])

    return Problem("case2", u, grad, hess, description="u = cos(x) sin(y) cos(z), A = I")


def _case3():
    def u(x, y, z):
        return np.cos(pi * x) * np.cos(pi * y) * np.exp(z)

    def grad(x, y, z):
        cx, cy, ez = np.cos(pi * x), np.cos(pi * y), np.exp(z)
        sx, sy = np.sin(pi * x), np.sin(pi * y)
        return _stack(-pi * sx * cy * ez, -pi * cx * sy * ez, cx * cy * ez)

    def hess(x, y, z):
        cx, cy, ez = np.cos(pi * x), np.cos(pi * y), np.exp(z)
        sx, sy = np.sin(pi * x), np.sin(pi * y)
        p2 = pi * pi
        return _tensor([
            [-p2 * cx * cy * ez, p2 * sx * sy * ez, -pi * sx * cy * ez],
            [p2 * sx * sy * ez, -p2 * cx * cy * ez, -pi * cx * sy * ez],
            [-pi * sx * cy * ez, -pi * cx * sy * ez, cx * cy * ez],
        ])

    return Problem("case3", u, grad, hess, description="u = cos(pi x) cos(pi y) exp(z), A = I")


def _sss():
    def u(x, y, z):
        return np.sin(x) * np.sin(y) * np.sin(z)

    def grad(x, y, z):
        sx, sy, sz = np.sin(x), np.sin(y), np.sin(z)
        cx, cy, cz = np.cos(x), np.cos(y), np.cos(z)
        return _stack(cx * sy * sz, sx * cy * sz, sx * sy * cz)

    def hess(x, y, z):
        sx, sy, sz = np.sin(x), np.sin(y), np.sin(z)
        cx, cy, cz = np.cos(x), np.cos(y), np.cos(z)
        return _tensor([
            [-sx * sy * sz, cx * cy * sz, cx * sy * cz],
            [cx * cy * sz, -sx * sy * sz, sx * cy * cz],
            [cx * sy * cz, sx * cy * cz, -sx * sy * sz],
        ])

    return u, grad, hess


def _case4():
    u, grad, hess = _sss()
    A0 = np.array([[10.0, 3.0, 1.0], [3.0, 2.0, 1.0], [1.0, 1.0, 2.0]])

    def A(x, y, z):
        shape = np.broadcast(x, y, z).shape
        return np.broadcast_to(A0, shape + (3, 3)).copy()

    return Problem("case4", u, grad, hess, A=A, diagonal_A=False,
                   description="u = sin(x) sin(y) sin(z), A = [10,3,1;3,2,1;1,1,2]")


def _cps(scale: float = 1.0):
    """``scale * cos(pi x) sin(pi y) cos(pi z)`` with derivatives."""

    def u(x, y, z):
        return scale * np.cos(pi * x) * np.sin(pi * y) * np.cos(pi * z)

    def grad(x, y, z):
        cx, sy, cz = np.cos(pi * x), np.sin(pi * y), np.cos(pi * z)
        sx, cy, sz = np.sin(pi * x), np.cos(pi * y), np.sin(pi * z)
        return scale * pi * _stack(-sx * sy * cz, cx * cy * cz, -cx * sy * sz)

    def hess(x, y, z):
        cx, sy, cz = np.cos(pi * x), np.sin(pi * y), np.cos(pi * z)
        sx, cy, sz = np.sin(pi * x), np.cos(pi * y), np.sin(pi * z)
        return scale * pi * pi * _tensor([
            [-cx * sy * cz, -sx * cy * cz, sx * sy * sz],
            [-sx * cy * cz, -cx * sy * cz, -cx * cy * sz],
            [sx * sy * sz, -cx * cy * sz, -cx * sy * cz],
        ])

    return u, grad, hess


def _case5(name="case5"):
    u, grad, hess = _cps()
    return Problem(name, u, grad, hess, description="u = cos(pi x) sin(pi y) cos(pi z), A = I")


# case 7 coefficients: (alpha_x, alpha_y, alpha_z, alpha) per subdomain
CASE7_PARAMS = {1: (1000.0, 100.0, 10.0, 0.01), 2: (1.0, 0.1, 0.01, 10.0)}


def _case7():
    ax1, ay1, az1, a1 = CASE7_PARAMS[1]
    ax2, ay2, az2, a2 = CASE7_PARAMS[2]
    u1, g1, h1 = _cps(a1)
    u2, g2, h2 = _cps(a2)

    def left(x):
        return np.asarray(x) < 0.5

    def u(x, y, z):
        return np.where(left(x), u1(x, y, z), u2(x, y, z))

    def grad(x, y, z):
        return np.where(left(x)[..., None], g1(x, y, z), g2(x, y, z))

    def hess(x, y, z):
        return np.where(left(x)[..., None, None], h1(x, y, z), h2(x, y, z))

    def A(x, y, z):
        shape = np.broadcast(x, y, z).shape
        d = np.where(left(np.broadcast_to(x, shape))[..., None], [ax1, ay1, az1], [ax2, ay2, az2])
        out = np.zeros(shape + (3, 3))
        for k in range(3):
            out[..., k, k] = d[..., k]
        return out

    return Problem("case7", u, grad, hess, A=A, interfaces_x=(0.5,),
                   description="piecewise A and u = alpha_i cos(pi x) sin(pi y) cos(pi z), jump at x = 1/2")


def _case8():
    u, grad, hess = _sss()

    def A(x, y, z):
        return _tensor([
            [1 + x * x, x * y / 4, x * z / 4],
            [x * y / 4, 1 + y * y, y * z / 4],
            [x * z / 4, y * z / 4, 1 + z * z],
        ])

    def div_A(x, y, z):
        # sum_i d(a_ij)/dx_i
        return _stack(2.5 * x, 2.5 * y, 2.5 * z)

    return Problem("case8", u, grad, hess, A=A, div_A=div_A, diagonal_A=False,
                   description="u = sin(x) sin(y) sin(z), variable A")


def _case9():
    def parts(x, y, z):
        X, Y, Z = x * (1 - x), y * (1 - 2 * y), z * (1 - 3 * z)
        dX, dY, dZ = 1 - 2 * x, 1 - 4 * y, 1 - 6 * z
        return X, Y, Z, dX, dY, dZ

    def u(x, y, z):
        X, Y, Z, *_ = parts(x, y, z)
        return X * Y * Z

    def grad(x, y, z):
        X, Y, Z, dX, dY, dZ = parts(x, y, z)
        return _stack(dX * Y * Z, X * dY * Z, X * Y * dZ)

    def hess(x, y, z):
        X, Y, Z, dX, dY, dZ = parts(x, y, z)
        return _tensor([
            [-2 * Y * Z, dX * dY * Z, dX * Y * dZ],
            [dX * dY * Z, -4 * X * Z, X * dY * dZ],
            [dX * Y * dZ, X * dY * dZ, -6 * X * Y],
        ])

    return Problem("case9", u, grad, hess, c=2.0,
                   description="-lap u + 2u = f, u = x(1-x) y(1-2y) z(1-3z)")


_BUILDERS = {
    1: _case1,
    2: _case2,
    3: _case3,
    4: _case4,
    5: _case5,
    6: lambda: _case5("case6"),
    7: _case7,
    8: _case8,
    9: _case9,
}
CASE_IDS = tuple(_BUILDERS)


def catalog(case_id: int) -> Problem:
    try:
        return _BUILDERS[int(case_id)]()
    except KeyError:
        raise ValueError(f"unknown test case {case_id}; choose one of {CASE_IDS}") from None


def consistency_residual(problem: Problem, points: np.ndarray, step: float = 1e-4) -> float:
    """Max of ``|f - (-div(A grad u) + c u)|`` at ``points`` with the divergence
    taken by central differences of the flux ``A grad u``."""
    x, y, z = points.T
    div = np.zeros(x.shape)
    for k in range(3):
        dp = [x, y, z]
        dm = [x, y, z]
        dp[k] = dp[k] + step
        dm[k] = dm[k] - step
        # fourth-order central difference
        dpp = [x, y, z]
        dmm = [x, y, z]
        dpp[k] = dpp[k] + 2 * step
        dmm[k] = dmm[k] - 2 * step
        fp, fm = problem.flux(*dp)[..., k], problem.flux(*dm)[..., k]
        fpp, fmm = problem.flux(*dpp)[..., k], problem.flux(*dmm)[..., k]
        div += (8 * (fp - fm) - (fpp - fmm)) / (12 * step)
    expected = -div + problem.c * problem.u(x, y, z)
    return float(np.max(np.abs(problem.f(x, y, z) - expected)))


# -- user problems from expression strings -------------------------------

_FUNCS = {"sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "atan"}
_CONSTS = {"pi", "e"}
_VARS = ("x", "y", "z")


def _to_sympy(text: str):
    """Translate an arithmetic expression in x, y, z into a sympy expression.

    Only numbers, the variables, ``pi``/``e``, ``+ - * / **`` (``^`` is
    accepted as a power) and the functions in ``_FUNCS`` are allowed.
    """
    import sympy as sp

    symbols = {v: sp.Symbol(v, real=True) for v in _VARS}
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return sp.nsimplify(node.value) if isinstance(node.value, int) else sp.Float(node.value)
        if isinstance(node, ast.Name):
            if node.id in symbols:
                return symbols[node.id]
            if node.id == "pi":
                return sp.pi
            if node.id == "e":
                return sp.E
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = walk(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp):
            a, b = walk(node.left), walk(node.right)
            ops = {ast.Add: lambda: a + b, ast.Sub: lambda: a - b, ast.Mult: lambda: a * b,
                   ast.Div: lambda: a / b, ast.Pow: lambda: a ** b}
            for op, fn in ops.items():
                if isinstance(node.op, op):
                    return fn()
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise ValueError(f"{node.func.id} takes exactly one argument")
            return getattr(sp, node.func.id)(walk(node.args[0]))
        raise ValueError(f"unsupported syntax in expression {text!r}")

    return walk(tree), symbols


def _lambdify(expr, symbols):
    import sympy as sp

    fn = sp.lambdify([symbols[v] for v in _VARS], expr, modules="numpy")

    def field_(x, y, z):
        return np.broadcast_to(np.asarray(fn(x, y, z), dtype=float), np.broadcast(x, y, z).shape)

    return field_


def problem_from_expressions(u: str, A=None, c: float = 0.0, name: str = "user") -> Problem:
    """Build a :class:`Problem` from an expression for ``u`` and, optionally,
    a scalar or 3x3 nested list of expressions for ``A``."""
    import sympy as sp

    u_expr, syms = _to_sympy(u)
    X = [syms[v] for v in _VARS]
    if A is None:
        A = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    elif isinstance(A, (str, int, float)):
        A = [[A, 0, 0], [0, A, 0], [0, 0, A]]
    if len(A) != 3 or any(len(r) != 3 for r in A):
        raise ValueError("A must be a scalar or a 3x3 nested list")
    A_expr = [[_to_sympy(str(a))[0].subs({sp.Symbol(v, real=True): syms[v] for v in _VARS}) for a in row] for row in A]
    for i in range(3):
        for j in range(i + 1, 3):
            if sp.simplify(A_expr[i][j] - A_expr[j][i]) != 0:
                raise ValueError("A must be symmetric")
    grad_e = [sp.diff(u_expr, v) for v in X]
    hess_e = [[sp.diff(g, v) for v in X] for g in grad_e]
    divA_e = [sum(sp.diff(A_expr[i][j], X[i]) for i in range(3)) for j in range(3)]

    u_f = _lambdify(u_expr, syms)
    g_f = [_lambdify(g, syms) for g in grad_e]
    h_f = [[_lambdify(h, syms) for h in row] for row in hess_e]
    A_f = [[_lambdify(a, syms) for a in row] for row in A_expr]
    d_f = [_lambdify(d, syms) for d in divA_e]
    diagonal = all(A_expr[i][j] == 0 for i in range(3) for j in range(3) if i != j)

    return Problem(
        name,
        u_f,
        lambda x, y, z: _stack(*(g(x, y, z) for g in g_f)),
        lambda x, y, z: _tensor([[h(x, y, z) for h in row] for row in h_f]),
        A=lambda x, y, z: _tensor([[a(x, y, z) for a in row] for row in A_f]),
        div_A=lambda x, y, z: _stack(*(d(x, y, z) for d in d_f)),
        c=float(c),
        diagonal_A=diagonal,
        description=f"user problem u = {u}",
    )


def load_problem_file(path: str | Path) -> Problem:
    """Read a JSON problem file with keys ``u`` (required), ``A``, ``c``, ``name``."""
    data = json.loads(Path(path).read_text())
    if "u" not in data:
        raise ValueError(f"{path}: problem file needs a 'u' expression")
    unknown = set(data) - {"u", "A", "c", "name"}
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return problem_from_expressions(data["u"], data.get("A"), data.get("c", 0.0), data.get("name", Path(path).stem))
