"""Legendre-Gauss-Lobatto nodal bases, Gauss quadrature and L2 projection."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

MAX_ORDER = 20


class InvalidOrderError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NodalBasis:
    """Lagrange basis on the k+1 LGL points of [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    diff_matrix: np.ndarray

    @property
    def npoints(self) -> int:
        return self.order + 1

    def interpolation_matrix(self, x) -> np.ndarray:
        """Rows are the Lagrange basis functions evaluated at the points ``x``."""
        return _barycentric_matrix(self.nodes, np.atleast_1d(np.asarray(x, dtype=float)))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.weights, f(self.points)))


def legendre_with_derivative(k: int, x: np.ndarray):
    """Return P_k(x), P_{k-1}(x) and P_k'(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if k == 0:
        return p_prev, np.zeros_like(x), np.zeros_like(x)
    p = x.copy()
    for j in range(2, k + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = k * (x * p - p_prev) / (x * x - 1.0)
    # endpoint values of P_k'
    end = np.isclose(np.abs(x), 1.0, rtol=0.0, atol=1e-300)
    dp = np.where(end, np.sign(x) ** (k + 1) * k * (k + 1) / 2.0, dp)
    return p, p_prev, dp


def _lgl_nodes(k: int) -> np.ndarray:
    # Newton on (1-x^2) P_k'(x) = k (P_{k-1} - x P_k), Chebyshev-Gauss-Lobatto start
    x = -np.cos(np.pi * np.arange(k + 1) / k)
    for _ in range(100):
        p, p_prev, _ = legendre_with_derivative(k, x)
        # f = P_{k-1} - x P_k  ;  f' = -(k+1) P_k
        update = (p_prev - x * p) / (-(k + 1) * p)
        update[0] = update[-1] = 0.0
        x = x - update
        if np.max(np.abs(update)) < 1e-15:
            break
    x[0], x[-1] = -1.0, 1.0
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    return x


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def _barycentric_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    lam = _barycentric_weights(nodes)
    diff = x[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, rtol=0.0, atol=1e-15)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = lam[None, :] / diff
        mat = terms / terms.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    mat[rows] = exact[rows].astype(float)
    return mat


def _diff_matrix(nodes: np.ndarray) -> np.ndarray:
    lam = _barycentric_weights(nodes)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    d = (lam[None, :] / lam[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    # negative-sum trick: rows annihilate constants exactly
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


@lru_cache(maxsize=None)
def lgl_basis(k: int) -> NodalBasis:
    """LGL nodes, quadrature weights and differentiation matrix for order ``k``."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_ORDER:
        raise InvalidOrderError(f"order must be an integer in [1, {MAX_ORDER}], got {k!r}")
    k = int(k)
    nodes = _lgl_nodes(k)
    p, _, _ = legendre_with_derivative(k, nodes)
    weights = 2.0 / (k * (k + 1) * p**2)
    d = _diff_matrix(nodes)
    for arr in (nodes, weights, d):
        arr.setflags(write=False)
    return NodalBasis(k, nodes, weights, d)


@lru_cache(maxsize=None)
def gauss_quadrature(nq: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``nq`` points, exact to degree 2*nq - 1."""
    if nq < 1:
        raise ValueError(f"need at least one quadrature point, got {nq}")
    x, w = np.polynomial.legendre.leggauss(nq)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, 2 * nq - 1)


def lgl_quadrature(k: int) -> QuadratureRule:
    b = lgl_basis(k)
    return QuadratureRule(b.nodes, b.weights, 2 * k - 1)


def over_integration_points(k: int) -> int:
    """Gauss points used when products of three degree-k polynomials must be exact."""
    return -(-(3 * k + 2) // 2)


def l2_project(f: Callable, mesh, basis: NodalBasis, quad: QuadratureRule | None = None,
               t: float | None = None):
    """L2-project ``f`` onto the broken polynomial space of ``basis`` on ``mesh``.

    ``f`` takes physical coordinates (``x`` in 1D, ``x, y`` in 2D) and returns
    an array whose trailing axis, if present, indexes solution components.
    """
    from .mesh import FieldState

    if quad is None:
        quad = gauss_quadrature(basis.order + 2)
    if quad.exact_degree < 2 * basis.order:
        raise ValueError("quadrature is not exact for the mass matrix")
    b = basis.interpolation_matrix(quad.points)
    mass = b.T @ (quad.weights[:, None] * b)
    proj = np.linalg.solve(mass, b.T * quad.weights[None, :])  # (k+1, nq)

    if mesh.dim == 1:
        x = mesh.map_points(quad.points)  # (ne, nq)
        vals = np.asarray(f(x) if t is None else f(x, t), dtype=float)
        if vals.ndim == 2:
            vals = vals[..., None]
        vals = np.broadcast_to(vals, x.shape + vals.shape[2:])
        out = np.einsum("iq,eqc->eic", proj, vals)
    elif mesh.dim == 2:
        x, y = mesh.map_points(quad.points)  # (nx, ny, nq, nq) each
        vals = np.asarray(f(x, y) if t is None else f(x, y, t), dtype=float)
        if vals.ndim == 4:
            vals = vals[..., None]
        vals = np.broadcast_to(vals, x.shape + vals.shape[4:])
        out = np.einsum("ia,jb,xyabc->xyijc", proj, proj, vals)
        out = out.reshape(mesh.nelements, basis.npoints**2, -1)
    else:
        raise ValueError(f"unsupported mesh dimension {mesh.dim}")
    return FieldState(mesh, basis, np.ascontiguousarray(out))
