"""Tensor Gauss-Legendre rules on boxes and axis-aligned rectangles, plus the
L2 projections used by the scheme: element linears, face constants and
element-constant vectors.

Scalar fields are callables ``f(x, y, z)`` acting elementwise on arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import ElementGeom, TensorMesh

__all__ = [
    "GaussRule",
    "gauss_rule",
    "integrate_box",
    "face_average",
    "project_p1",
    "project_cell_gradient",
    "box_points",
    "face_points",
    "element_moments",
    "face_averages",
    "cell_averages",
]

DEFAULT_ORDER = 4
# cells (or faces) evaluated per batch; bounds peak memory of tensor-valued fields
CHUNK = 8192


def _chunked(fn, count: int, *arrays):
    """Apply ``fn`` to row blocks of ``arrays`` and concatenate the results."""
    if count <= CHUNK:
        return fn(*arrays)
    parts = [fn(*(a[i:i + CHUNK] for a in arrays)) for i in range(0, count, CHUNK)]
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class GaussRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size


def _legendre(p: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_p(x) and P_p'(x) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    if p == 0:
        return p0, np.zeros_like(x)
    for k in range(2, p + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = p * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def gauss_rule(order: int) -> GaussRule:
    """``order``-point Gauss-Legendre rule on [-1, 1], nodes by Newton iteration."""
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    if order == 1:
        nodes, weights = np.zeros(1), np.full(1, 2.0)
    else:
        k = np.arange(1, order + 1)
        x = np.cos(np.pi * (k - 0.25) / (order + 0.5))
        for _ in range(100):
            p, dp = _legendre(order, x)
            dx = p / dp
            x = x - dx
            if np.max(np.abs(dx)) < 1e-15:
                break
        _, dp = _legendre(order, x)
        weights = 2.0 / ((1.0 - x * x) * dp * dp)
        idx = np.argsort(x)
        nodes, weights = x[idx], weights[idx]
        # symmetrize to kill round-off asymmetry
        nodes = 0.5 * (nodes - nodes[::-1])
        weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GaussRule(nodes, weights)


def _ref_box(order: int) -> tuple[np.ndarray, np.ndarray]:
    rule = gauss_rule(order)
    t = 0.5 * (rule.nodes + 1.0)
    w = 0.5 * rule.weights
    T = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", w, w, w).ravel()
    return T, W


def box_points(lo: np.ndarray, e: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points ``(E, P, 3)`` and weights ``(E, P)`` on boxes ``lo + [0, e]``.

    Weights include the volume, so ``weights.sum(axis=1)`` is the box volume.
    """
    lo = np.atleast_2d(lo)
    e = np.atleast_2d(e)
    T, W = _ref_box(order)
    pts = lo[:, None, :] + T[None, :, :] * e[:, None, :]
    wts = W[None, :] * np.prod(e, axis=1)[:, None]
    return pts, wts


def face_points(lo: np.ndarray, hi: np.ndarray, axis: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Points ``(F, P, 3)`` and area-weighted weights on axis-aligned rectangles.

    Each face is degenerate along its normal ``axis`` (``lo == hi`` there).
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    axis = np.atleast_1d(axis)
    rule = gauss_rule(order)
    t = 0.5 * (rule.nodes + 1.0)
    w = 0.5 * rule.weights
    ta, tb = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
    W = np.outer(w, w).ravel()
    # tangential axes in increasing order
    tan = np.array([[1, 2], [0, 2], [0, 1]])[axis]
    ext = hi - lo
    pts = np.repeat(lo[:, None, :], ta.size, axis=1)
    rows = np.arange(lo.shape[0])
    a0, a1 = tan[:, 0], tan[:, 1]
    pts[rows, :, a0] += ta[None, :] * ext[rows, a0][:, None]
    pts[rows, :, a1] += tb[None, :] * ext[rows, a1][:, None]
    area = ext[rows, a0] * ext[rows, a1]
    return pts, W[None, :] * area[:, None]


def integrate_box(f, geom: ElementGeom, order: int = DEFAULT_ORDER) -> float:
    pts, wts = box_points(geom.lo, geom.e, order)
    vals = f(pts[..., 0], pts[..., 1], pts[..., 2])
    return float(np.sum(np.broadcast_to(vals, wts.shape) * wts))


def face_average(g, lo, hi, axis: int, order: int = DEFAULT_ORDER) -> float:
    """Mean of ``g`` over the rectangle spanned by ``lo``/``hi`` normal to ``axis``."""
    pts, wts = face_points(np.asarray(lo, float), np.asarray(hi, float), np.array([axis]), order)
    vals = np.broadcast_to(g(pts[..., 0], pts[..., 1], pts[..., 2]), wts.shape)
    return float(np.sum(vals * wts) / np.sum(wts))


def element_moments(f, lo: np.ndarray, e: np.ndarray, order: int = DEFAULT_ORDER) -> np.ndarray:
    """``(E, 4)`` moments ``(int f, int f (x-xc), int f (y-yc), int f (z-zc))``."""
    lo, e = np.atleast_2d(lo), np.atleast_2d(e)
    return _chunked(lambda lo_, e_: _element_moments(f, lo_, e_, order), lo.shape[0], lo, e)


def _element_moments(f, lo, e, order):
    pts, wts = box_points(lo, e, order)
    vals = np.broadcast_to(f(pts[..., 0], pts[..., 1], pts[..., 2]), wts.shape) * wts
    center = np.atleast_2d(lo) + 0.5 * np.atleast_2d(e)
    d = pts - center[:, None, :]
    return np.stack([vals.sum(axis=1)] + [(vals * d[..., k]).sum(axis=1) for k in range(3)], axis=1)


def p1_from_moments(moments: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Coefficients in the centred basis {1, x-xc, y-yc, z-zc}; the basis is
    L2-orthogonal on a box so each coefficient is a moment over its norm."""
    e = np.atleast_2d(e)
    vol = np.prod(e, axis=1)
    norms = np.column_stack([vol, vol * e[:, 0] ** 2 / 12, vol * e[:, 1] ** 2 / 12, vol * e[:, 2] ** 2 / 12])
    return moments / norms


def project_p1(u, geom: ElementGeom, order: int = DEFAULT_ORDER) -> np.ndarray:
    if order < 2:
        raise ValueError("project_p1 needs quadrature order >= 2")
    m = element_moments(u, geom.lo, geom.e, order)
    return p1_from_moments(m, geom.e)[0]


def project_cell_gradient(grad_u, geom: ElementGeom, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Cell average of a vector field ``grad_u(x, y, z) -> (..., 3)``."""
    pts, wts = box_points(geom.lo, geom.e, order)
    vals = grad_u(pts[..., 0], pts[..., 1], pts[..., 2])
    return np.einsum("epk,ep->k", vals, wts) / geom.volume


def face_averages(g, mesh: TensorMesh, order: int = DEFAULT_ORDER, faces: np.ndarray | None = None) -> np.ndarray:
    """Face means of ``g`` on every face of ``mesh`` (or on ``faces``)."""
    sel = slice(None) if faces is None else faces
    lo, hi, axis = mesh.face_lo[sel], mesh.face_hi[sel], mesh.face_axis[sel]

    def block(lo_, hi_, axis_):
        pts, wts = face_points(lo_, hi_, axis_, order)
        vals = np.broadcast_to(g(pts[..., 0], pts[..., 1], pts[..., 2]), wts.shape)
        return (vals * wts).sum(axis=1) / wts.sum(axis=1)

    return _chunked(block, lo.shape[0], lo, hi, axis)


def cell_averages(f, mesh: TensorMesh, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Element means of a field with any trailing shape, e.g. ``(E, 3, 3)`` for a tensor."""

    def block(lo_, e_):
        pts, wts = box_points(lo_, e_, order)
        vals = np.asarray(f(pts[..., 0], pts[..., 1], pts[..., 2]))
        if vals.shape[:2] != wts.shape:
            vals = np.broadcast_to(vals, wts.shape)
        wn = wts / wts.sum(axis=1, keepdims=True)
        return np.einsum("ep...,ep->e...", vals, wn)

    return _chunked(block, mesh.element_count, mesh.element_lo, mesh.element_e)
