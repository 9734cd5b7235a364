"""phi-functions: scalar and dense kernels, and an adaptive Krylov engine for
linear combinations  w = sum_i dt^i phi_i(dt L) b_i  of a matrix-free operator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .basis import gauss_quadrature

MAX_PHI_INDEX = 6

# Pade degrees and the 1-norm bounds up to which each is accurate to double precision
_PADE_THETA = (
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
)


class KrylovDivergenceError(RuntimeError):
    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (last error estimate {estimate:.3e})")
        self.estimate = estimate


class ZeroSeedError(ValueError):
    pass


def phi_scalar(i: int, tau: complex) -> complex:
    """phi_i(tau); phi_0 = exp."""
    if not 0 <= i <= MAX_PHI_INDEX:
        raise ValueError(f"phi index must be in [0, {MAX_PHI_INDEX}], got {i}")
    if i == 0:
        return np.exp(tau)
    if abs(tau) <= 30.0:
        # integral form: positive integrand, no cancellation for small |tau|
        q = gauss_quadrature(48)
        z = 0.5 * (q.points + 1.0)
        vals = np.exp((1.0 - z) * tau) * z ** (i - 1)
        return 0.5 * np.dot(q.weights, vals) / math.factorial(i - 1)
    partial = sum(tau**j / math.factorial(j) for j in range(i))
    return (np.exp(tau) - partial) / tau**i


def _pade_coefficients(m: int) -> np.ndarray:
    return np.array([math.factorial(2 * m - j) * math.factorial(m)
                     / (math.factorial(2 * m) * math.factorial(j) * math.factorial(m - j))
                     for j in range(m + 1)])


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant."""
    a = np.asarray(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("expm needs a square matrix")
    if n == 0:
        return a.copy()
    eye = np.eye(n, dtype=a.dtype)
    norm = np.linalg.norm(a, 1)
    if not np.isfinite(norm):
        raise OverflowError("non-finite matrix passed to expm")
    s = 0
    for m, theta in _PADE_THETA:
        if norm <= theta:
            break
    else:
        m = 13
        s = max(0, int(math.ceil(math.log2(norm / _PADE_THETA[-1][1]))))
    a = a / 2.0**s
    c = _pade_coefficients(m)
    a2 = a @ a
    # split into even (v) and odd (u) parts
    power = eye
    u_even = c[1] * eye
    v = c[0] * eye
    for j in range(2, m + 1, 2):
        power = power @ a2
        v = v + c[j] * power
        if j + 1 <= m:
            u_even = u_even + c[j + 1] * power
    u = a @ u_even
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def phi_dense_all(m: np.ndarray, p: int) -> list[np.ndarray]:
    """[phi_0(M), ..., phi_p(M)] from one exponential of a block-augmented matrix."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    if p == 0:
        return [expm(m)]
    big = np.zeros((n * (p + 1), n * (p + 1)))
    big[:n, :n] = m
    for j in range(p):
        big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = np.eye(n)
    e = expm(big)
    return [e[:n, j * n:(j + 1) * n] for j in range(p + 1)]


def phi_dense(i: int, m: np.ndarray) -> np.ndarray:
    if not 0 <= i <= MAX_PHI_INDEX:
        raise ValueError(f"phi index must be in [0, {MAX_PHI_INDEX}], got {i}")
    return phi_dense_all(m, i)[i]


def phi_combination_dense(a: np.ndarray, b: Sequence[np.ndarray], dt: float) -> np.ndarray:
    """Reference value of sum_i dt^i phi_i(dt A) b_i for explicit matrices."""
    phis = phi_dense_all(dt * np.asarray(a, dtype=float), len(b) - 1)
    return sum(dt**i * (phis[i] @ bi) for i, bi in enumerate(b))


@dataclass
class KrylovStats:
    substeps: int = 0
    rejections: int = 0
    krylov_iterations: int = 0
    calls: int = 0

    def merge(self, other: "KrylovStats") -> None:
        self.substeps += other.substeps
        self.rejections += other.rejections
        self.krylov_iterations += other.krylov_iterations
        self.calls += other.calls


class KrylovFactorization:
    """Arnoldi (or incomplete orthogonalization) relation  A V_m = V_{m+1} Hbar_m."""

    def __init__(self, op: Callable, seed: np.ndarray, orth_length: int, capacity: int):
        seed = np.asarray(seed, dtype=float)
        beta = float(np.linalg.norm(seed))
        if beta == 0.0 or not np.isfinite(beta):
            raise ZeroSeedError("Krylov seed must be a nonzero finite vector")
        self.op = op
        self.orth_length = orth_length
        self.beta = beta
        self.capacity = capacity
        self._v = np.zeros((capacity + 1, seed.size))
        self._v[0] = seed / beta
        self._h = np.zeros((capacity + 1, capacity))
        self.m = 0
        self.breakdown = False
        self.matvecs = 0

    @property
    def V(self) -> np.ndarray:
        return self._v[: self.m].T

    @property
    def H(self) -> np.ndarray:
        """(m+1) x m Hessenberg matrix."""
        return self._h[: self.m + 1, : self.m]

    @property
    def next_vector(self) -> np.ndarray:
        return self._v[self.m]

    def extend(self, m_target: int) -> None:
        m_target = min(m_target, self.capacity)
        full = self.orth_length >= m_target
        while self.m < m_target and not self.breakdown:
            j = self.m
            w = self.op(self._v[j])
            self.matvecs += 1
            wnorm = float(np.linalg.norm(w))
            lo = 0 if full else max(0, j + 1 - self.orth_length)
            for _ in range(2 if full else 1):
                for i in range(lo, j + 1):
                    hij = float(np.dot(self._v[i], w))
                    self._h[i, j] += hij
                    w = w - hij * self._v[i]
            h = float(np.linalg.norm(w))
            self._h[j + 1, j] = h
            self.m = j + 1
            if h <= 1e-13 * max(wnorm, 1e-300) or h == 0.0:
                self.breakdown = True
                self._h[j + 1, j] = 0.0
            else:
                self._v[j + 1] = w / h


def krylov_build(op: Callable, seed: np.ndarray, m: int, orth_length: int) -> KrylovFactorization:
    """m steps of Arnoldi (orth_length >= m) or IOP; stops early on breakdown."""
    if m < 1:
        raise ValueError("need at least one Krylov step")
    fac = KrylovFactorization(op, seed, orth_length, m)
    fac.extend(m)
    return fac


@dataclass
class PhiCombinationProblem:
    op: Callable[[np.ndarray], np.ndarray]
    b: Sequence[np.ndarray]
    dt: float
    tol: float = 1e-12
    max_basis: int = 128
    orth_length: int = 2
    initial_basis: int = 16
    max_substeps: int = 40
    max_rejections: int = 200

    def __post_init__(self):
        if len(self.b) < 1:
            raise ValueError("need at least b_0")
        n = np.asarray(self.b[0]).size
        if any(np.asarray(v).size != n for v in self.b):
            raise ValueError("all b_i must have the same dimension")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def _bottom_state(t: float, p: int, inv_eta: float) -> np.ndarray:
    # exp(t J) e_p for the p x p superdiagonal shift J
    return np.array([t ** (p - 1 - k) / math.factorial(p - 1 - k) for k in range(p)]) * inv_eta


def _rescale(tau: float, err: float, target: float, j: int) -> float:
    # the estimate behaves like tau^(j/4) or better; aim for half the target
    if err <= 0.0:
        return 5.0 * tau
    factor = (0.5 * target / err) ** (1.0 / max(1.0, j / 4.0))
    return tau * min(5.0, max(0.2, factor))


def phi_combination(prob: PhiCombinationProblem, stats: KrylovStats | None = None) -> np.ndarray:
    """Adaptive Krylov evaluation of sum_i dt^i phi_i(dt L) b_i.

    The combination is the first block of exp(dt A_hat) applied to a seed,
    where A_hat = [[L, eta W], [0, J]] carries b_1..b_p in W.  The interval
    [0, dt] is covered by substeps; a substep is accepted when the residual
    error estimate is below tol times the substep's seed norm, per unit time.
    """
    b = [np.asarray(v, dtype=float).ravel() for v in prob.b]
    n = b[0].size
    p = len(b) - 1
    bmax = max((float(np.linalg.norm(v)) for v in b[1:]), default=0.0)
    eta = 2.0 ** (-math.ceil(math.log2(bmax))) if bmax > 0 else 1.0
    w_cols = eta * np.column_stack([b[p - k] for k in range(p)]) if p else None  # [b_p, ..., b_1]

    def aug_op(v):
        if not p:
            return np.asarray(prob.op(v), dtype=float).ravel()
        x, y = v[:n], v[n:]
        top = np.asarray(prob.op(x), dtype=float).ravel() + w_cols @ y
        bottom = np.empty(p)
        bottom[:-1] = y[1:]
        bottom[-1] = 0.0
        return np.concatenate([top, bottom])

    local = KrylovStats(calls=1)
    tau_end = float(prob.dt)
    tau_now = 0.0
    tau = tau_end
    m = min(prob.initial_basis, prob.max_basis)
    capacity = min(prob.max_basis, n + p)
    # when the basis can span the whole space, IOP cannot reach the invariant
    # subspace; orthogonalize fully so the projection becomes exact
    orth_length = prob.orth_length if n + p > prob.max_basis else capacity
    state = np.concatenate([b[0], _bottom_state(0.0, p, 1.0 / eta)])
    fac = None
    err = 0.0
    while tau_now < tau_end:
        if fac is None:
            fac = KrylovFactorization(aug_op, state, orth_length, capacity)
        if fac.m < m:
            before = fac.matvecs
            fac.extend(m)
            local.krylov_iterations += fac.matvecs - before
        j = fac.m
        if fac.breakdown:
            # invariant subspace: the projection is exact for any step length
            tau = tau_end - tau_now
            f = expm(tau * fac._h[:j, :j])
            cand = fac.beta * (fac.V @ f[:, 0])
            err = 0.0
        else:
            hext = np.zeros((j + 1, j + 1))
            hext[:j, :j] = fac._h[:j, :j]
            hext[0, j] = 1.0
            f = expm(tau * hext)
            err = fac.beta * fac._h[j, j - 1] * abs(f[j - 1, j])
            cand = fac.beta * (fac.V @ f[:j, 0])
        # relative to the substep's seed norm: a diverging candidate must not
        # loosen its own acceptance test
        target = prob.tol * fac.beta * tau / tau_end
        if err <= target and np.all(np.isfinite(cand)):
            tau_now = tau_end if tau_end - (tau_now + tau) <= 1e-14 * tau_end else tau_now + tau
            local.substeps += 1
            state = cand
            state[n:] = _bottom_state(tau_now, p, 1.0 / eta)
            fac = None
            if tau_now < tau_end:
                if local.substeps >= prob.max_substeps:
                    raise KrylovDivergenceError(
                        f"exceeded {prob.max_substeps} substeps", err / max(target, 1e-300))
                tau = min(_rescale(tau, err, target, j), tau_end - tau_now)
            continue
        local.rejections += 1
        if local.rejections > prob.max_rejections:
            raise KrylovDivergenceError("Krylov substepping did not converge",
                                        err / max(target, 1e-300))
        if m < capacity:
            m = min(capacity, int(math.ceil(1.5 * m)))
        else:
            tau = min(0.5 * tau, _rescale(tau, err, target, j))
    if stats is not None:
        stats.merge(local)
    return state[:n].copy()
