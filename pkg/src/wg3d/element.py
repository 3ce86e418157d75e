"""Element operators of the lowest-order simplified WG method on boxes.

Face values are ordered x-, x+, y-, y+, z-, z+ on every element.  All
builders are vectorised: they take edge lengths ``e`` of shape ``(E, 3)``
(or ``(3,)`` for a single element) and return stacked matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import ElementGeom

__all__ = [
    "LocalOps",
    "local_ops",
    "weak_gradient_map",
    "extension_map",
    "stabilizer_map",
    "face_center_eval",
    "stiffness",
    "load",
    "reaction_mass",
    "p1_mass_diag",
]


def _edges(e) -> tuple[np.ndarray, bool]:
    if isinstance(e, ElementGeom):
        e = e.e
    e = np.asarray(e, dtype=float)
    single = e.ndim == 1
    e = np.atleast_2d(e)
    if np.any(e <= 0):
        raise ValueError("element edge lengths must be positive")
    return e, single


def _areas(e: np.ndarray) -> np.ndarray:
    ex, ey, ez = e.T
    return np.stack([ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey], axis=1)


def _out(a: np.ndarray, single: bool) -> np.ndarray:
    return a[0] if single else a


def weak_gradient_map(e) -> np.ndarray:
    """3x6 map from face values to the (constant) discrete weak gradient."""
    e, single = _edges(e)
    G = np.zeros((e.shape[0], 3, 6))
    for k in range(3):
        G[:, k, 2 * k] = -1.0 / e[:, k]
        G[:, k, 2 * k + 1] = 1.0 / e[:, k]
    return _out(G, single)


def extension_map(e) -> np.ndarray:
    """4x6 map from face values to the centred P1 coefficients of S(v_b).

    The constant term is the area-weighted mean of the six face values; the
    slopes are the weak gradient.
    """
    e, single = _edges(e)
    W = _areas(e)
    C = np.zeros((e.shape[0], 4, 6))
    C[:, 0, :] = W / W.sum(axis=1, keepdims=True)
    C[:, 1:, :] = weak_gradient_map(e)
    return _out(C, single)


def face_center_eval(e) -> np.ndarray:
    """6x4 map from centred P1 coefficients to values at the six face centres."""
    e, single = _edges(e)
    N = np.zeros((e.shape[0], 6, 4))
    N[:, :, 0] = 1.0
    for k in range(3):
        N[:, 2 * k, k + 1] = -0.5 * e[:, k]
        N[:, 2 * k + 1, k + 1] = 0.5 * e[:, k]
    return _out(N, single)


def stabilizer_map(e) -> np.ndarray:
    """6x6 map ``v -> Q_b S(v) - v``, i.e. S(v) at each face centre minus the face value."""
    e, single = _edges(e)
    D = face_center_eval(e) @ extension_map(e) - np.eye(6)
    return _out(D, single)


@dataclass(frozen=True)
class LocalOps:
    G: np.ndarray
    C: np.ndarray
    D: np.ndarray
    W: np.ndarray


def local_ops(geom: ElementGeom) -> LocalOps:
    return LocalOps(
        weak_gradient_map(geom.e),
        extension_map(geom.e),
        stabilizer_map(geom.e),
        geom.face_areas,
    )


def _check_spd(A: np.ndarray) -> None:
    if not np.allclose(A, np.swapaxes(A, -1, -2), rtol=1e-12, atol=1e-14):
        raise ValueError("diffusion tensor must be symmetric")
    if np.any(np.linalg.eigvalsh(A) <= 0.0):
        raise ValueError("diffusion tensor must be positive definite")


def stiffness(e, A_bar, rho: float, h: float, check: bool = True) -> np.ndarray:
    """6x6 blocks ``|T| G^T A G + (rho/h) D^T diag(|F|) D``.

    ``A_bar`` is a 3x3 tensor or an ``(E, 3, 3)`` stack of element averages.
    """
    if rho <= 0 or h <= 0:
        raise ValueError(f"rho and h must be positive, got rho={rho}, h={h}")
    e, single = _edges(e)
    A_bar = np.broadcast_to(np.asarray(A_bar, dtype=float), (e.shape[0], 3, 3))
    if check:
        _check_spd(A_bar)
    G = weak_gradient_map(e)
    D = stabilizer_map(e)
    vol = np.prod(e, axis=1)
    W = _areas(e)
    K = vol[:, None, None] * np.einsum("eki,ekl,elj->eij", G, A_bar, G)
    K += (rho / h) * np.einsum("epi,ep,epj->eij", D, W, D)
    return _out(K, single)


def p1_mass_diag(e) -> np.ndarray:
    """L2 norms squared of the centred basis {1, x-xc, y-yc, z-zc} on each box."""
    e, _ = _edges(e)
    vol = np.prod(e, axis=1)
    return np.column_stack([vol, vol * e[:, 0] ** 2 / 12, vol * e[:, 1] ** 2 / 12, vol * e[:, 2] ** 2 / 12])


def load(e, moments) -> np.ndarray:
    """Load ``b = C^T m`` realising ``(f, S(v_b))_T`` from the P1 moments of f."""
    e, single = _edges(e)
    m = np.atleast_2d(moments)
    b = np.einsum("eki,ek->ei", extension_map(e), m)
    return _out(b, single)


def reaction_mass(e, c) -> np.ndarray:
    """6x6 blocks realising ``(c S(u_b), S(v_b))_T`` for a per-element constant ``c``."""
    e, single = _edges(e)
    C = extension_map(e)
    c = np.broadcast_to(np.asarray(c, dtype=float), (e.shape[0],))
    M = np.einsum("eki,ek,ekj->eij", C, p1_mass_diag(e), C) * c[:, None, None]
    return _out(M, single)
