"""Nodal DG discretization of the 2D compressible Euler equations on periodic
tensor-product meshes, with a Roe flux and a flux-Jacobian operator split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import NodalBasis
from .mesh import PERIODIC, FieldState, Mesh
from .split import SplitOperator

NCOMP = 4
EULER_FLUXES = ("roe", "lf")


class InadmissibleStateError(ValueError):
    pass


@dataclass(frozen=True)
class EulerConfig:
    gamma: float = 1.4
    alpha: float = 2.0
    strength: float = 0.05
    # (u, v, rho, T, p) of the mean flow
    mean_flow: tuple = (0.2, 0.0, 1.0, 1.0, 1.0)
    center: tuple = (5.0, 0.0)
    # interface flux: "roe" or "lf" (local Lax-Friedrichs)
    flux: str = "roe"

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if self.flux not in EULER_FLUXES:
            raise ValueError(f"flux must be one of {EULER_FLUXES}")


# -- pointwise physics; trailing axis holds (rho, rho u, rho v, rho E) -----------

def primitives(q, gamma):
    rho = q[..., 0]
    u = q[..., 1] / rho
    v = q[..., 2] / rho
    p = (gamma - 1.0) * (q[..., 3] - 0.5 * rho * (u * u + v * v))
    return rho, u, v, p


def conservative(rho, u, v, p, gamma):
    return np.stack([rho, rho * u, rho * v, p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)], axis=-1)


def check_admissible(q, gamma):
    rho, _, _, p = primitives(np.asarray(q, dtype=float), gamma)
    if np.any(~(rho > 0)) or np.any(~(p > 0)):
        raise InadmissibleStateError("state has nonpositive density or pressure")


def sound_speed(q, gamma):
    rho, _, _, p = primitives(q, gamma)
    return np.sqrt(gamma * p / rho)


def normal_flux(q, n, gamma):
    """F(q) . n for a fixed unit normal ``n``."""
    rho, u, v, p = primitives(q, gamma)
    un = u * n[0] + v * n[1]
    return np.stack([rho * un,
                     q[..., 1] * un + p * n[0],
                     q[..., 2] * un + p * n[1],
                     (q[..., 3] + p) * un], axis=-1)


def euler_flux(q, gamma=1.4):
    """Flux tensor with trailing shape (4, 2): columns are the x and y fluxes."""
    q = np.asarray(q, dtype=float)
    check_admissible(q, gamma)
    return np.stack([normal_flux(q, (1.0, 0.0), gamma), normal_flux(q, (0.0, 1.0), gamma)], axis=-1)


def flux_jacobian(q, n, gamma=1.4):
    """d(F(q).n)/dq with rows and columns ordered (rho, rho u, rho v, rho E)."""
    q = np.asarray(q, dtype=float)
    check_admissible(q, gamma)
    rho, u, v, p = primitives(q, gamma)
    nx, ny = n
    g1 = gamma - 1.0
    un = u * nx + v * ny
    phi = 0.5 * g1 * (u * u + v * v)
    h = (q[..., 3] + p) / rho
    zero = np.zeros_like(rho)
    rows = [
        [zero, zero + nx, zero + ny, zero],
        [phi * nx - u * un, un + (1.0 - g1) * u * nx, u * ny - g1 * v * nx, zero + g1 * nx],
        [phi * ny - v * un, v * nx - g1 * u * ny, un + (1.0 - g1) * v * ny, zero + g1 * ny],
        [un * (phi - h), h * nx - g1 * u * un, h * ny - g1 * v * un, gamma * un],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


@dataclass(frozen=True)
class RoeAverage:
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    H: np.ndarray
    a: np.ndarray


def roe_average(q_minus, q_plus, gamma=1.4, check: bool = True) -> RoeAverage:
    rl, ul, vl, pl = primitives(np.asarray(q_minus, dtype=float), gamma)
    rr, ur, vr, pr = primitives(np.asarray(q_plus, dtype=float), gamma)
    hl = (q_minus[..., 3] + pl) / rl
    hr = (q_plus[..., 3] + pr) / rr
    sl, sr = np.sqrt(rl), np.sqrt(rr)
    w = sl + sr
    u = (sl * ul + sr * ur) / w
    v = (sl * vl + sr * vr) / w
    h = (sl * hl + sr * hr) / w
    a2 = (gamma - 1.0) * (h - 0.5 * (u * u + v * v))
    if check and np.any(~(a2 > 0)):
        raise InadmissibleStateError("Roe-averaged sound speed is not real")
    return RoeAverage(sl * sr, u, v, h, np.sqrt(np.maximum(a2, 0.0) if not check else a2))


def eigenvectors(avg: RoeAverage, n, gamma=1.4):
    """Right (R) and left (L = R^{-1}) eigenvectors of A(avg, n), eigenvalues ascending."""
    u, v, h, a = avg.u, avg.v, avg.H, avg.a
    nx, ny = n
    g1 = gamma - 1.0
    un = u * nx + v * ny
    q2 = u * u + v * v
    one, zero = np.ones_like(u), np.zeros_like(u)
    r = np.stack([
        np.stack([one, u - a * nx, v - a * ny, h - a * un], axis=-1),
        np.stack([one, u, v, 0.5 * q2], axis=-1),
        np.stack([zero, zero - ny, zero + nx, -u * ny + v * nx], axis=-1),
        np.stack([one, u + a * nx, v + a * ny, h + a * un], axis=-1),
    ], axis=-1)  # columns are eigenvectors
    a2 = a * a
    left = np.stack([
        np.stack([0.5 * g1 * q2 + a * un, -g1 * u - a * nx, -g1 * v - a * ny, g1 * one], axis=-1) / (2 * a2)[..., None],
        np.stack([a2 - 0.5 * g1 * q2, g1 * u, g1 * v, -g1 * one], axis=-1) / a2[..., None],
        np.stack([u * ny - v * nx, zero - ny, zero + nx, zero], axis=-1),
        np.stack([0.5 * g1 * q2 - a * un, -g1 * u + a * nx, -g1 * v + a * ny, g1 * one], axis=-1) / (2 * a2)[..., None],
    ], axis=-2)  # rows are left eigenvectors
    lam = np.stack([un - a, un, un, un + a], axis=-1)
    return r, lam, left


def abs_jacobian(avg: RoeAverage, n, gamma=1.4):
    """|A| = R |Lambda| R^{-1} at an averaged state."""
    r, lam, left = eigenvectors(avg, n, gamma)
    return np.einsum("...ik,...k,...kj->...ij", r, np.abs(lam), left)


def roe_flux(q_minus, q_plus, n, gamma=1.4):
    """<F.n> + 1/2 |A(q_Roe)| (q^- - q^+)."""
    q_minus = np.asarray(q_minus, dtype=float)
    q_plus = np.asarray(q_plus, dtype=float)
    avg = roe_average(q_minus, q_plus, gamma)
    r, lam, left = eigenvectors(avg, n, gamma)
    dq = q_minus - q_plus
    alpha = np.einsum("...kj,...j->...k", left, dq)
    diss = np.einsum("...ik,...k->...i", r, np.abs(lam) * alpha)
    return 0.5 * (normal_flux(q_minus, n, gamma) + normal_flux(q_plus, n, gamma)) + 0.5 * diss


def max_normal_speed(q, n, gamma=1.4):
    _, u, v, _ = primitives(q, gamma)
    return np.abs(u * n[0] + v * n[1]) + sound_speed(q, gamma)


def lax_friedrichs_flux(q_minus, q_plus, n, gamma=1.4):
    """<F.n> + 1/2 max(|u.n| + a) (q^- - q^+), speeds taken pointwise over both traces."""
    q_minus = np.asarray(q_minus, dtype=float)
    q_plus = np.asarray(q_plus, dtype=float)
    lam = np.maximum(max_normal_speed(q_minus, n, gamma), max_normal_speed(q_plus, n, gamma))
    return (0.5 * (normal_flux(q_minus, n, gamma) + normal_flux(q_plus, n, gamma))
            + 0.5 * lam[..., None] * (q_minus - q_plus))


def isentropic_vortex(x, y, t: float = 0.0, cfg: EulerConfig = EulerConfig()):
    """Exact translating vortex; returns conservative variables on the trailing axis."""
    g = cfg.gamma
    u_inf, v_inf, rho_inf, t_inf, p_inf = cfg.mean_flow
    xt = x - cfg.center[0] - u_inf * t
    yt = y - cfg.center[1] - v_inf * t
    r2 = xt * xt + yt * yt
    amp = cfg.strength / (2.0 * np.pi)
    bump = np.exp(cfg.alpha * (1.0 - r2) / 2.0)
    u = u_inf - amp * yt * bump
    v = v_inf + amp * xt * bump
    cp = g / (g - 1.0)
    temp = t_inf - amp**2 * bump**2 / (2.0 * cfg.alpha * cp)
    rho = rho_inf * (temp / t_inf) ** (1.0 / (g - 1.0))
    p = p_inf * (temp / t_inf) ** (g / (g - 1.0))
    return conservative(rho, u, v, p, g)


# -- the DG operator --------------------------------------------------------------

class EulerDG:
    """Collocated strong-form DG on a periodic quad mesh; state layout (nx, ny, i, j, c)."""

    def __init__(self, mesh: Mesh, basis: NodalBasis, cfg: EulerConfig = EulerConfig()):
        if mesh.dim != 2:
            raise ValueError("Euler operator needs a 2D mesh")
        if mesh.bc != PERIODIC:
            raise ValueError("Euler operator supports periodic meshes only")
        self.mesh, self.basis, self.cfg = mesh, basis, cfg
        self.gamma = cfg.gamma
        self.k = basis.order
        self.nx, self.ny = mesh.shape
        hx, hy = mesh.widths
        self.sx = (2.0 / hx)[:, None, None, None, None]
        self.sy = (2.0 / hy)[None, :, None, None, None]
        # face lifts; LGL end weights are equal
        self.lx = (2.0 / hx)[:, None, None, None] / basis.weights[-1]
        self.ly = (2.0 / hy)[None, :, None, None] / basis.weights[-1]
        self.D = np.asarray(basis.diff_matrix)
        self.shape = (self.nx, self.ny, self.k + 1, self.k + 1, NCOMP)

    def _q(self, vec):
        return np.asarray(vec, dtype=float).reshape(self.shape)

    def _x_traces(self, q):
        # interface i sits between element i (left) and i+1 (right), periodic
        return q[:, :, -1], np.roll(q[:, :, 0], -1, axis=0)

    def _y_traces(self, q):
        return q[:, :, :, -1], np.roll(q[:, :, :, 0], -1, axis=1)

    def assemble(self, gx, gy, sx, sy):
        """-div of nodal fluxes (gx, gy) plus lifts of (trace - interface flux) mismatches."""
        r = -self.sx * np.einsum("ai,XYijc->XYajc", self.D, gx)
        r -= self.sy * np.einsum("bj,XYijc->XYibc", self.D, gy)
        r[:, :, -1] += self.lx * (gx[:, :, -1] - sx)
        r[:, :, 0] += self.lx * (np.roll(sx, 1, axis=0) - gx[:, :, 0])
        r[:, :, :, -1] += self.ly * (gy[:, :, :, -1] - sy)
        r[:, :, :, 0] += self.ly * (np.roll(sy, 1, axis=1) - gy[:, :, :, 0])
        return r

    def full_rhs(self, vec, t: float = 0.0):
        q = self._q(vec)
        g = self.gamma
        fx = normal_flux(q, (1.0, 0.0), g)
        fy = normal_flux(q, (0.0, 1.0), g)
        qa, qb = self._x_traces(q)
        sx = self.interface_flux(qa, qb, (1.0, 0.0))
        qa, qb = self._y_traces(q)
        sy = self.interface_flux(qa, qb, (0.0, 1.0))
        return self.assemble(fx, fy, sx, sy).ravel()

    def interface_flux(self, qa, qb, n):
        if self.cfg.flux == "lf":
            return lax_friedrichs_flux(qa, qb, n, self.gamma)
        return roe_flux(qa, qb, n, self.gamma)

    def frozen_dissipation(self, qa, qb, n):
        """Per-face-node 4x4 dissipation matrices of the linear flux, from reference traces."""
        if self.cfg.flux == "lf":
            lam = np.maximum(max_normal_speed(qa, n, self.gamma), max_normal_speed(qb, n, self.gamma))
            return lam[..., None, None] * np.eye(NCOMP)
        return abs_jacobian(roe_average(qa, qb, self.gamma), n, self.gamma)

    def split(self, reference: FieldState, t: float = 0.0) -> SplitOperator:
        g = self.gamma
        qt = self._q(reference.values)
        ax = flux_jacobian(qt, (1.0, 0.0), g)
        ay = flux_jacobian(qt, (0.0, 1.0), g)
        # frozen dissipation from the reference traces on both sides of each face
        dx = self.frozen_dissipation(*self._x_traces(qt), (1.0, 0.0))
        dy = self.frozen_dissipation(*self._y_traces(qt), (0.0, 1.0))

        def linear_parts(q):
            gx = np.einsum("XYijab,XYijb->XYija", ax, q)
            gy = np.einsum("XYijab,XYijb->XYija", ay, q)
            qa, qb = self._x_traces(q)
            sx = 0.5 * (gx[:, :, -1] + np.roll(gx[:, :, 0], -1, axis=0)) \
                + 0.5 * np.einsum("XYjab,XYjb->XYja", dx, qa - qb)
            qa, qb = self._y_traces(q)
            sy = 0.5 * (gy[:, :, :, -1] + np.roll(gy[:, :, :, 0], -1, axis=1)) \
                + 0.5 * np.einsum("XYiab,XYib->XYia", dy, qa - qb)
            return gx, gy, sx, sy

        def apply_L(vec):
            return self.assemble(*linear_parts(self._q(vec))).ravel()

        def apply_N(vec):
            q = self._q(vec)
            lgx, lgy, lsx, lsy = linear_parts(q)
            fx = normal_flux(q, (1.0, 0.0), g)
            fy = normal_flux(q, (0.0, 1.0), g)
            qa, qb = self._x_traces(q)
            sx = self.interface_flux(qa, qb, (1.0, 0.0))
            qa, qb = self._y_traces(q)
            sy = self.interface_flux(qa, qb, (0.0, 1.0))
            return self.assemble(fx - lgx, fy - lgy, sx - lsx, sy - lsy).ravel()

        return SplitOperator(reference, apply_L, apply_N, "collocation")

    def max_wave_speed(self, vec) -> float:
        q = self._q(vec)
        _, u, v, _ = primitives(q, self.gamma)
        a = sound_speed(q, self.gamma)
        return float(max(np.max(np.abs(u) + a), np.max(np.abs(v) + a)))

    def component_integrals(self, vec) -> np.ndarray:
        """Integral of each component over the domain with the LGL rule."""
        q = self._q(vec)
        w = self.basis.weights
        hx, hy = self.mesh.widths
        jac = (hx[:, None] * hy[None, :] / 4.0)
        return np.einsum("XY,i,j,XYijc->c", jac, w, w, q)


def euler_split_operator(reference: FieldState, cfg: EulerConfig = EulerConfig()) -> SplitOperator:
    return EulerDG(reference.mesh, reference.basis, cfg).split(reference)


def euler_full_rhs(q: FieldState, cfg: EulerConfig = EulerConfig()) -> FieldState:
    return q.with_vector(EulerDG(q.mesh, q.basis, cfg).full_rhs(q.values))
