"""Exponential (exp_euler, EPI2, EXPRB32, EXPRB42) and explicit Runge-Kutta
time steppers, plus the outer time loop with per-step relinearization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import FieldState
from .phi import KrylovStats, PhiCombinationProblem, phi_combination
from .split import SplitOperator

EXPONENTIAL_KINDS = ("exp_euler", "epi2", "exprb32", "exprb42")
RK_KINDS = ("rk2", "rk3", "rk4")
INTEGRATOR_KINDS = EXPONENTIAL_KINDS + RK_KINDS


class BlowUpError(RuntimeError):
    def __init__(self, step: int, t: float):
        super().__init__(f"solution blew up at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class KrylovSettings:
    tol: float = 1e-12
    max_basis: int = 128
    orth_length: int = 2
    initial_basis: int = 16
    max_substeps: int = 40


def _combo(op: SplitOperator, b, dt, ks: KrylovSettings, stats: KrylovStats | None):
    prob = PhiCombinationProblem(op.apply_L, b, dt, tol=ks.tol, max_basis=ks.max_basis,
                                 orth_length=ks.orth_length, initial_basis=ks.initial_basis,
                                 max_substeps=ks.max_substeps)
    return phi_combination(prob, stats)


def _as_vec(u):
    if isinstance(u, FieldState):
        return u.as_vector(), u
    return np.asarray(u, dtype=float).ravel(), None


def _restore(vec, template):
    return template.with_vector(vec) if template is not None else vec


def step_exp_euler(op: SplitOperator, u, dt: float, krylov: KrylovSettings = KrylovSettings(),
                   stats: KrylovStats | None = None):
    """e^{dt L} u + dt phi_1(dt L) N(u)."""
    v, tpl = _as_vec(u)
    out = _combo(op, [v, op.apply_N(v)], dt, krylov, stats)
    return _restore(out, tpl)


def step_epi2(op: SplitOperator, u, dt: float, krylov: KrylovSettings = KrylovSettings(),
              stats: KrylovStats | None = None):
    """u + dt phi_1(dt L) R(u)."""
    v, tpl = _as_vec(u)
    r = op.apply_L(v) + op.apply_N(v)
    out = v + _combo(op, [np.zeros_like(v), r], dt, krylov, stats)
    return _restore(out, tpl)


def _two_stage(op, v, dt, stage_dt, weight, krylov, stats):
    n_v = op.apply_N(v)
    r = op.apply_L(v) + n_v
    zero = np.zeros_like(v)
    base = v + _combo(op, [zero, r], dt, krylov, stats)
    stage = base if stage_dt == dt else v + _combo(op, [zero, r], stage_dt, krylov, stats)
    d = op.apply_N(stage) - n_v
    # weight * dt * phi_3(dt L) d  ==  dt^3 phi_3(dt L) (weight d / dt^2)
    return base + _combo(op, [zero, zero, zero, weight * d / dt**2], dt, krylov, stats)


def step_exprb32(op: SplitOperator, u, dt: float, krylov: KrylovSettings = KrylovSettings(),
                 stats: KrylovStats | None = None):
    v, tpl = _as_vec(u)
    return _restore(_two_stage(op, v, dt, dt, 2.0, krylov, stats), tpl)


def step_exprb42(op: SplitOperator, u, dt: float, krylov: KrylovSettings = KrylovSettings(),
                 stats: KrylovStats | None = None):
    v, tpl = _as_vec(u)
    return _restore(_two_stage(op, v, dt, 0.75 * dt, 32.0 / 9.0, krylov, stats), tpl)


def step_rk(kind: str, rhs: Callable, u, dt: float, t: float = 0.0):
    """Heun (rk2), Shu-Osher SSP (rk3) or classical (rk4) step of u' = rhs(u, t)."""
    v, tpl = _as_vec(u)
    if kind == "rk2":
        k1 = rhs(v, t)
        k2 = rhs(v + dt * k1, t + dt)
        out = v + 0.5 * dt * (k1 + k2)
    elif kind == "rk3":
        u1 = v + dt * rhs(v, t)
        u2 = 0.75 * v + 0.25 * (u1 + dt * rhs(u1, t + dt))
        out = v / 3.0 + 2.0 / 3.0 * (u2 + dt * rhs(u2, t + 0.5 * dt))
    elif kind == "rk4":
        k1 = rhs(v, t)
        k2 = rhs(v + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(v + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(v + dt * k3, t + dt)
        out = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        raise ValueError(f"unknown Runge-Kutta kind {kind!r}")
    return _restore(out, tpl)


_EXP_STEPPERS = {
    "exp_euler": step_exp_euler,
    "epi2": step_epi2,
    "exprb32": step_exprb32,
    "exprb42": step_exprb42,
}


@dataclass(eq=False)
class ProblemBinding:
    """What the time loop needs from a semi-discrete problem, on flat vectors.

    ``split(reference, t)`` builds the L/N split frozen at ``reference``;
    ``rhs(u, t)`` is the reference-free right-hand side used by RK steppers.
    """

    split: Callable[[np.ndarray, float], SplitOperator]
    rhs: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class TimeLoopConfig:
    dt: float
    t_final: float
    # "every-step" rebuilds L at u^n; "initial" keeps L frozen at u_0.
    # None picks "initial" for exp_euler and "every-step" otherwise.
    relinearize: str | None = None
    krylov: KrylovSettings = KrylovSettings()
    blowup_factor: float = 1e8
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= 0:
            raise ValueError("t_final must be nonnegative")
        if self.relinearize not in (None, "every-step", "initial"):
            raise ValueError("relinearize must be 'every-step' or 'initial'")


@dataclass
class IntegrationResult:
    state: np.ndarray | FieldState
    t: float
    steps: int
    krylov_iterations: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    @property
    def total_krylov_iterations(self) -> int:
        return int(sum(self.krylov_iterations))


def step_times(dt: float, t_final: float) -> list[float]:
    """Step sizes covering [0, t_final]: whole steps plus one shortened final step."""
    n_full = int(math.floor(t_final / dt * (1.0 + 1e-12)))
    sizes = [dt] * n_full
    rest = t_final - n_full * dt
    if rest > 1e-10 * dt:
        sizes.append(rest)
    return sizes


def integrate(problem: ProblemBinding, u0, kind: str, cfg: TimeLoopConfig,
              on_step: Callable | None = None) -> IntegrationResult:
    if kind not in INTEGRATOR_KINDS:
        raise ValueError(f"unknown integrator {kind!r}; expected one of {INTEGRATOR_KINDS}")
    v, tpl = _as_vec(u0)
    v = v.copy()
    limit = cfg.blowup_factor * max(1.0, float(np.max(np.abs(v))) if v.size else 1.0)
    relin = cfg.relinearize or ("initial" if kind == "exp_euler" else "every-step")
    frozen = None
    t = 0.0
    result = IntegrationResult(v, 0.0, 0)
    for n, h in enumerate(step_times(cfg.dt, cfg.t_final)):
        if kind in RK_KINDS:
            v = step_rk(kind, problem.rhs, v, h, t)
            result.krylov_iterations.append(0)
        else:
            if relin == "every-step" or frozen is None:
                frozen = problem.split(v, t)
            stats = KrylovStats()
            v = _EXP_STEPPERS[kind](frozen, v, h, cfg.krylov, stats)
            result.krylov_iterations.append(stats.krylov_iterations)
        t += h
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > limit:
            raise BlowUpError(n + 1, t)
        if on_step is not None:
            on_step(n + 1, t, v, result.krylov_iterations[-1])
        if cfg.snapshot_every and (n + 1) % cfg.snapshot_every == 0:
            result.snapshots.append((t, _restore(v.copy(), tpl)))
        result.steps = n + 1
    result.t = cfg.t_final if result.steps else 0.0
    result.state = _restore(v, tpl)
    return result


def scalar_riccati_binding(lam: float) -> ProblemBinding:
    """y' = lam y + y^2 with L the Jacobian lam + 2 y~ and N the remainder."""

    def rhs(y, t=0.0):
        return lam * y + y * y

    def split(ref, t=0.0):
        ref = np.asarray(ref, dtype=float).copy()
        jac = lam + 2.0 * ref

        def apply_L(y):
            return jac * y

        def apply_N(y):
            return rhs(y) - jac * y

        return SplitOperator(ref, apply_L, apply_N, "exact")

    return ProblemBinding(split, rhs)


def scalar_riccati_exact(lam: float, y0: float, t: float) -> float:
    # 1/y solves w' = -lam w - 1
    w0 = 1.0 / y0
    w = (w0 + 1.0 / lam) * math.exp(-lam * t) - 1.0 / lam
    return 1.0 / w
