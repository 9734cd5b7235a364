"""Nodal DG discretization of 1D viscous Burgers  u_t + (u^2/2)_x = kappa u_xx + s
with an LDG auxiliary gradient and a linear/nonlinear operator split."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import NodalBasis, gauss_quadrature, over_integration_points
from .mesh import PERIODIC, FieldState, Mesh
from .split import SplitOperator

SHOCK_ADAPTIVE = "shock-adaptive"
FLUX_KINDS = ("LF", "EF")


@dataclass(frozen=True)
class BurgersConfig:
    kappa: float
    flux_kind: str = "LF"
    sigma: float | str = 0.0
    source: Callable | None = None  # s(x, t)
    over_integrate: bool = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.flux_kind not in FLUX_KINDS:
            raise ValueError(f"flux_kind must be one of {FLUX_KINDS}")
        if self.sigma != SHOCK_ADAPTIVE and not float(self.sigma) >= 0:
            raise ValueError("sigma must be nonnegative or 'shock-adaptive'")


# pointwise flux functions; jump = u_minus - u_plus for a face normal of +1

def lax_friedrichs_flux(u_minus, u_plus, jump):
    avg = 0.25 * (u_minus**2 + u_plus**2)
    return avg + 0.5 * np.maximum(np.abs(u_minus), np.abs(u_plus)) * jump


def entropy_flux(u_minus, u_plus, jump, sigma, h):
    avg_sq = 0.25 * (u_minus**2 + u_plus**2)
    avg = 0.5 * (u_minus + u_plus)
    return (avg_sq + avg**2) / 3.0 + sigma / h * jump


def linear_flux(ut_minus, ut_plus, u_minus, u_plus):
    """(u~ u)^* : average of u~ u plus upwinding on the frozen speed."""
    avg = 0.5 * (ut_minus * u_minus + ut_plus * u_plus)
    return avg + 0.5 * np.maximum(np.abs(ut_minus), np.abs(ut_plus)) * (u_minus - u_plus)


def shock_adaptive_sigma(kappa, h, u_minus, u_plus):
    return kappa / 100.0 + h * np.maximum(np.abs(u_minus), np.abs(u_plus))


class BurgersDG:
    """Element matrices and operator kernels for one mesh/basis/config."""

    def __init__(self, mesh: Mesh, basis: NodalBasis, cfg: BurgersConfig):
        if mesh.dim != 1:
            raise ValueError("Burgers operator needs a 1D mesh")
        self.mesh, self.basis, self.cfg = mesh, basis, cfg
        k = basis.order
        self.k = k
        self.ne = mesh.nelements
        self.h = np.diff(mesh.axes[0])
        self.periodic = mesh.bc == PERIODIC
        # characteristic size per face: the owner (left) element, or the only neighbor
        self.h_face = np.concatenate([self.h[:1], self.h])
        if cfg.over_integrate:
            quad = gauss_quadrature(over_integration_points(k))
            self.qpoints, self.W = quad.points, quad.weights
            self.B = basis.interpolation_matrix(quad.points)
        else:
            self.qpoints, self.W = basis.nodes, basis.weights
            self.B = np.eye(k + 1)
        self.Bd = self.B @ basis.diff_matrix
        self.Mref = self.B.T @ (self.W[:, None] * self.B)
        self.Minv = np.linalg.inv(self.Mref)
        self.grad_vol = self.B.T @ (self.W[:, None] * self.Bd)
        self.WBd = self.W[:, None] * self.Bd
        self.x_quad = mesh.map_points(self.qpoints)

    # -- plumbing -----------------------------------------------------------
    def _u(self, vec):
        return np.asarray(vec, dtype=float).reshape(self.ne, self.k + 1)

    def traces(self, u):
        """Left (A) and right (B) values at faces 0..ne; zero ghosts at Dirichlet ends."""
        a = np.empty(self.ne + 1)
        b = np.empty(self.ne + 1)
        a[1:] = u[:, -1]
        b[:-1] = u[:, 0]
        if self.periodic:
            a[0] = u[-1, -1]
            b[-1] = u[0, 0]
        else:
            a[0] = 0.0
            b[-1] = 0.0
        return a, b

    def gradient(self, u):
        """LDG auxiliary q = u_x with the central flux u** = average{u}."""
        a, b = self.traces(u)
        ustar = 0.5 * (a + b)
        if not self.periodic:
            ustar[0] = ustar[-1] = 0.0
        rhs = u @ self.grad_vol.T
        rhs[:, -1] += ustar[1:] - u[:, -1]
        rhs[:, 0] -= ustar[:-1] - u[:, 0]
        return (2.0 / self.h)[:, None] * (rhs @ self.Minv.T)

    def q_star(self, q):
        a, b = self.traces(q)
        qs = 0.5 * (a + b)
        if not self.periodic:
            qs[0] = q[0, 0]
            qs[-1] = q[-1, -1]
        return qs

    def divergence(self, fq, g):
        """Weak form of d/dx of a flux with quadrature values ``fq`` and face values ``g``."""
        r = -(fq @ self.WBd)
        r[:, -1] += g[1:]
        r[:, 0] -= g[:-1]
        return (2.0 / self.h)[:, None] * (r @ self.Minv.T)

    def nonlinear_flux(self, a, b):
        jump = a - b
        cfg = self.cfg
        if cfg.flux_kind == "LF":
            return lax_friedrichs_flux(a, b, jump)
        sigma = (shock_adaptive_sigma(cfg.kappa, self.h_face, a, b)
                 if cfg.sigma == SHOCK_ADAPTIVE else float(cfg.sigma))
        return entropy_flux(a, b, jump, sigma, self.h_face)

    def sigma_faces(self, u):
        cfg = self.cfg
        if cfg.flux_kind != "EF":
            return np.zeros(self.ne + 1)
        if cfg.sigma == SHOCK_ADAPTIVE:
            a, b = self.traces(u)
            return shock_adaptive_sigma(cfg.kappa, self.h_face, a, b)
        return np.full(self.ne + 1, float(cfg.sigma))

    def source_term(self, t):
        if self.cfg.source is None:
            return None
        s = np.asarray(self.cfg.source(self.x_quad, t), dtype=float)
        s = np.broadcast_to(s, self.x_quad.shape)
        return (s * self.W) @ self.B @ self.Minv.T

    # -- operators ------------------------------------------------------------
    def full_rhs(self, vec, t: float = 0.0):
        u = self._u(vec)
        q = self.gradient(u)
        uq = u @ self.B.T
        fq = self.cfg.kappa * (q @ self.B.T) - 0.5 * uq**2
        a, b = self.traces(u)
        g = self.cfg.kappa * self.q_star(q) - self.nonlinear_flux(a, b)
        r = self.divergence(fq, g)
        s = self.source_term(t)
        if s is not None:
            r = r + s
        return r.ravel()

    def split(self, reference: FieldState, t: float = 0.0) -> SplitOperator:
        ut = self._u(reference.values)
        ut_q = ut @ self.B.T
        ut_a, ut_b = self.traces(ut)
        kappa = self.cfg.kappa
        source = self.source_term(t)

        def apply_L(vec):
            u = self._u(vec)
            q = self.gradient(u)
            fq = kappa * (q @ self.B.T) - ut_q * (u @ self.B.T)
            a, b = self.traces(u)
            g = kappa * self.q_star(q) - linear_flux(ut_a, ut_b, a, b)
            return self.divergence(fq, g).ravel()

        def apply_N(vec):
            u = self._u(vec)
            uq = u @ self.B.T
            fq = ut_q * uq - 0.5 * uq**2
            a, b = self.traces(u)
            g = linear_flux(ut_a, ut_b, a, b) - self.nonlinear_flux(a, b)
            r = self.divergence(fq, g)
            if source is not None:
                r = r + source
            return r.ravel()

        quad = "over-integration" if self.cfg.over_integrate else "collocation"
        return SplitOperator(reference, apply_L, apply_N, quad)

    # -- norms and energy -------------------------------------------------------
    def inner(self, u, v) -> float:
        """Broken L2 inner product with this operator's element mass matrix."""
        u, v = self._u(u), self._u(v)
        return float(np.sum(0.5 * self.h * np.einsum("ei,ij,ej->e", u, self.Mref, v)))

    def jump_penalty(self, u) -> float:
        """sum over faces of (sigma/h) [u]^2."""
        a, b = self.traces(u)
        return float(np.sum(self.sigma_faces(u) / self.h_face * (a - b) ** 2
                            * self._face_multiplicity()))

    def _face_multiplicity(self):
        # periodic: faces 0 and ne are the same physical face
        w = np.ones(self.ne + 1)
        if self.periodic:
            w[0] = 0.0
        return w

    def dg_norm_sq(self, u) -> float:
        """||u_x||^2 (broken) + sum_faces (1/h) [u]^2."""
        u = self._u(u)
        ux = (2.0 / self.h)[:, None] * (u @ self.basis.diff_matrix.T)
        grad = self.inner(ux, ux)
        a, b = self.traces(u)
        return grad + float(np.sum((a - b) ** 2 / self.h_face * self._face_multiplicity()))


def burgers_operator(mesh: Mesh, basis: NodalBasis, cfg: BurgersConfig) -> BurgersDG:
    return BurgersDG(mesh, basis, cfg)


def burgers_gradient(u: FieldState, cfg: BurgersConfig) -> FieldState:
    op = BurgersDG(u.mesh, u.basis, cfg)
    return u.with_vector(op.gradient(op._u(u.values)))


def burgers_split_operator(reference: FieldState, cfg: BurgersConfig, t: float = 0.0) -> SplitOperator:
    return BurgersDG(reference.mesh, reference.basis, cfg).split(reference, t)


def burgers_full_rhs(u: FieldState, cfg: BurgersConfig, t: float = 0.0) -> FieldState:
    op = BurgersDG(u.mesh, u.basis, cfg)
    return u.with_vector(op.full_rhs(u.values, t))


def energy_balance(u: FieldState, cfg: BurgersConfig):
    """Return ((u, R(u)), kappa ||q||^2, sum (sigma/h)[u]^2)."""
    op = BurgersDG(u.mesh, u.basis, cfg)
    vec = op._u(u.values)
    r = op.full_rhs(vec)
    q = op.gradient(vec)
    return op.inner(vec, r), cfg.kappa * op.inner(q, q), op.jump_penalty(vec)


# manufactured solution u = sin(x^2) x (x - 1) on (0, 1)

def mms_exact(x, t=0.0):
    return np.sin(x**2) * x * (x - 1.0)


def mms_derivatives(x):
    s, c = np.sin(x**2), np.cos(x**2)
    p = x**2 - x
    du = 2 * x * c * p + s * (2 * x - 1)
    d2u = 2 * c * p - 4 * x**2 * s * p + 4 * x * c * (2 * x - 1) + 2 * s
    return du, d2u


def mms_source(kappa: float):
    """Source s = u u_x - kappa u_xx making mms_exact a steady solution."""
    def s(x, t=0.0):
        du, d2u = mms_derivatives(x)
        return mms_exact(x) * du - kappa * d2u
    return s
