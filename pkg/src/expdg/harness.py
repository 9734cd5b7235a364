"""Experiment runner: problem setup, error norms, observed orders, Courant
numbers, stored reference solutions and CSV reporting."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .basis import NodalBasis, gauss_quadrature, l2_project, lgl_basis
from .burgers import (BurgersConfig, BurgersDG, SHOCK_ADAPTIVE, mms_exact, mms_source)
from .euler import EulerConfig, EulerDG, isentropic_vortex
from .integrators import (BlowUpError, INTEGRATOR_KINDS, IntegrationResult, KrylovSettings,
                          ProblemBinding, TimeLoopConfig, integrate)
from .mesh import DIRICHLET_ZERO, FieldState, Mesh, build_interval_mesh, build_quad_mesh, min_node_spacing
from .phi import KrylovDivergenceError

PROBLEMS = ("burgers-mms", "burgers-smooth", "burgers-shock", "euler-vortex")
REFERENCE_MAGIC = b"EXPDG-REFERENCE v1\n"


class ConfigError(ValueError):
    pass


class ReferenceMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "burgers-smooth"
    integrator: str = "epi2"
    k: int = 4
    ne: tuple = (40,)
    dt: tuple = (0.01,)
    t_final: float | None = None
    flux: str | None = None
    sigma: float | str = 0.0
    kappa: float | None = None
    quadrature: str = "over"
    # "exact", "generate" or a path to a stored reference file
    reference: str = "auto"
    ref_integrator: str = "rk4"
    ref_dt: float = 1e-5
    ref_k: int | None = None
    ref_ne: int | None = None
    ref_dir: str = "references"
    krylov_tol: float = 1e-12
    krylov_max_basis: int = 128
    krylov_orth_length: int = 2
    krylov_max_substeps: int = 40
    relinearize: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if self.integrator not in INTEGRATOR_KINDS:
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        object.__setattr__(self, "ne", tuple(int(n) for n in _as_tuple(self.ne)))
        object.__setattr__(self, "dt", tuple(float(d) for d in _as_tuple(self.dt)))
        if len(self.ne) > 1 and len(self.dt) > 1 and len(self.ne) != len(self.dt):
            raise ConfigError("joint ne/dt sweeps need lists of equal length")
        if any(n < 1 for n in self.ne) or any(not d > 0 for d in self.dt):
            raise ConfigError("ne must be positive and dt must be > 0")
        if self.quadrature not in ("over", "collocation"):
            raise ConfigError("quadrature must be 'over' or 'collocation'")
        if self.problem == "burgers-shock" and any(n % 2 for n in self.ne):
            raise ConfigError("burgers-shock needs an even number of elements so x=0.5 is a face")

    @property
    def final_time(self) -> float:
        return self.t_final if self.t_final is not None else DEFAULT_T_FINAL[self.problem]

    @property
    def krylov(self) -> KrylovSettings:
        return KrylovSettings(tol=self.krylov_tol, max_basis=self.krylov_max_basis,
                              orth_length=self.krylov_orth_length,
                              max_substeps=self.krylov_max_substeps)

    def points(self) -> list[tuple[int, float]]:
        n = max(len(self.ne), len(self.dt))
        ne = self.ne * n if len(self.ne) == 1 else self.ne
        dt = self.dt * n if len(self.dt) == 1 else self.dt
        return list(zip(ne, dt))

    @property
    def spatial_sweep(self) -> bool:
        return len(self.ne) > 1


def _as_tuple(v):
    if isinstance(v, str):
        return tuple(x for x in v.split(",") if x.strip())
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


DEFAULT_T_FINAL = {"burgers-mms": 0.01, "burgers-smooth": 1.0, "burgers-shock": 1.0, "euler-vortex": 1.0}
DEFAULT_KAPPA = {"burgers-mms": 0.03, "burgers-smooth": 0.03, "burgers-shock": 0.002}


# -- problem setup -------------------------------------------------------------

@dataclass(eq=False)
class ProblemInstance:
    mesh: Mesh
    basis: NodalBasis
    u0: FieldState
    binding: ProblemBinding
    components: tuple
    exact: Callable | None  # exact(x[, y], t) or None
    kappa: float
    max_speed: Callable[[np.ndarray], float]


def smooth_initial(x):
    return np.sin(2 * np.pi * x) ** 3 * (1.0 - x) ** 1.5


def shock_initial(x):
    return np.sin(2 * np.pi * x)


def burgers_config_for(cfg: ExperimentConfig) -> BurgersConfig:
    kappa = cfg.kappa if cfg.kappa is not None else DEFAULT_KAPPA[cfg.problem]
    flux = cfg.flux or ("EF" if cfg.problem == "burgers-shock" else "LF")
    sigma = cfg.sigma
    if cfg.problem == "burgers-shock" and flux == "EF" and sigma in (0, 0.0, None):
        sigma = SHOCK_ADAPTIVE
    source = mms_source(kappa) if cfg.problem == "burgers-mms" else None
    return BurgersConfig(kappa, flux, sigma, source=source, over_integrate=cfg.quadrature == "over")


def build_problem(cfg: ExperimentConfig, k: int, ne: int) -> ProblemInstance:
    basis = lgl_basis(k)
    if cfg.problem == "euler-vortex":
        n = int(round(math.sqrt(ne)))
        if n * n != ne:
            raise ConfigError("euler-vortex needs a square element count (nx = ny)")
        ecfg = EulerConfig(flux=cfg.flux or "roe")
        mesh = build_quad_mesh(((0.0, 10.0), (-5.0, 5.0)), n, n)
        op = EulerDG(mesh, basis, ecfg)
        u0 = l2_project(lambda x, y: isentropic_vortex(x, y, 0.0, ecfg), mesh, basis)
        binding = ProblemBinding(lambda v, t: op.split(u0.with_vector(v), t), op.full_rhs)
        return ProblemInstance(mesh, basis, u0, binding, ("rho", "rhou", "rhov", "rhoE"),
                               lambda x, y, t: isentropic_vortex(x, y, t, ecfg), 0.0, op.max_wave_speed)
    bcfg = burgers_config_for(cfg)
    mesh = build_interval_mesh(0.0, 1.0, ne, DIRICHLET_ZERO)
    op = BurgersDG(mesh, basis, bcfg)
    initial = {"burgers-mms": mms_exact, "burgers-smooth": smooth_initial,
               "burgers-shock": shock_initial}[cfg.problem]
    u0 = l2_project(initial, mesh, basis)
    binding = ProblemBinding(lambda v, t: op.split(u0.with_vector(v), t), op.full_rhs)
    exact = (lambda x, t: mms_exact(x)) if cfg.problem == "burgers-mms" else None
    return ProblemInstance(mesh, basis, u0, binding, ("u",), exact, bcfg.kappa,
                           lambda v: float(np.max(np.abs(v))))


# -- measurements ----------------------------------------------------------------

def _values_at_quadrature(state: FieldState, points: np.ndarray) -> np.ndarray:
    b = state.basis.interpolation_matrix(points)
    if state.mesh.dim == 1:
        return np.einsum("qi,eic->eqc", b, state.values)
    nx, ny = state.mesh.shape
    v = state.values.reshape(nx, ny, state.basis.npoints, state.basis.npoints, -1)
    return np.einsum("ai,bj,XYijc->XYabc", b, b, v)


def _evaluate_reference(ref: FieldState, mesh: Mesh, points: np.ndarray) -> np.ndarray:
    if mesh.dim == 1:
        x = mesh.map_points(points)
        return ref.evaluate(x.ravel()).reshape(*x.shape, -1)
    if ref.mesh.shape != mesh.shape or any(not np.allclose(a, b) for a, b in zip(ref.mesh.axes, mesh.axes)):
        raise ReferenceMismatchError("2D discrete references must share the element partition")
    return _values_at_quadrature(ref, points)


def l2_error(state: FieldState, reference, t: float = 0.0, quad=None) -> np.ndarray:
    """Broken L2 norm of state - reference per component.

    ``reference`` is a callable of physical coordinates and time, or a
    FieldState (restricted to this mesh by sampling at quadrature points).
    """
    quad = quad or gauss_quadrature(state.order + 2)
    uq = _values_at_quadrature(state, quad.points)
    mesh = state.mesh
    if isinstance(reference, FieldState):
        rq = _evaluate_reference(reference, mesh, quad.points)
    elif mesh.dim == 1:
        rq = np.asarray(reference(mesh.map_points(quad.points), t), dtype=float)
    else:
        x, y = mesh.map_points(quad.points)
        rq = np.asarray(reference(x, y, t), dtype=float)
    rq = rq.reshape(uq.shape)
    diff2 = (uq - rq) ** 2
    w = quad.weights
    if mesh.dim == 1:
        h = np.diff(mesh.axes[0])
        return np.sqrt(np.einsum("e,q,eqc->c", h / 2.0, w, diff2))
    hx, hy = mesh.widths
    jac = hx[:, None] * hy[None, :] / 4.0
    return np.sqrt(np.einsum("XY,a,b,XYabc->c", jac, w, w, diff2))


def observed_order(errors: Sequence[float], scales: Sequence[float]) -> list[float]:
    """order_i = log(e_{i-1}/e_i) / log(s_{i-1}/s_i) for i >= 1."""
    e = np.asarray(errors, dtype=float)
    s = np.asarray(scales, dtype=float)
    if e.shape != s.shape or e.size < 2:
        raise ValueError("need matching error and scale lists of length >= 2")
    if np.any(~(e > 0)) or np.any(~(s > 0)):
        raise ValueError("errors and scales must be positive")
    return list(np.log(e[:-1] / e[1:]) / np.log(s[:-1] / s[1:]))


def courant_numbers(state, dt: float, mesh: Mesh, basis: NodalBasis, kappa: float,
                    speed: float | None = None) -> tuple[float, float]:
    """(Cr_a, Cr_d) = (c dt / dx, kappa dt / dx^2) with dx the smallest LGL gap."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dx = min_node_spacing(mesh, basis)
    if speed is None:
        vals = state.values if isinstance(state, FieldState) else np.asarray(state)
        speed = float(np.max(np.abs(vals))) if np.size(vals) else 0.0
    return speed * dt / dx, kappa * dt / dx**2


# -- references ------------------------------------------------------------------

def reference_metadata(cfg: ExperimentConfig) -> dict:
    k = cfg.ref_k or cfg.k
    ne = cfg.ref_ne or cfg.ne[-1]
    if cfg.problem == "euler-vortex":
        kappa, flux, sigma = 0.0, cfg.flux or "roe", 0.0
    else:
        b = burgers_config_for(cfg)
        kappa, flux, sigma = b.kappa, b.flux_kind, b.sigma
    problem = {
        "problem": cfg.problem, "kappa": kappa, "flux": flux, "sigma": sigma,
        "quadrature": cfg.quadrature, "t_final": cfg.final_time,
        "integrator": cfg.ref_integrator, "dt": cfg.ref_dt, "k": k, "ne": ne,
    }
    digest = hashlib.sha256(json.dumps(problem, sort_keys=True).encode()).hexdigest()
    return {**problem, "problem_hash": digest}


def write_reference(path: Path, state: FieldState, meta: dict) -> None:
    meta = {**meta, "shape": list(state.values.shape)}
    payload = state.values.astype("<f8").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(REFERENCE_MAGIC)
        fh.write(json.dumps(meta, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    tmp.replace(path)


def read_reference(path: Path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.readline() != REFERENCE_MAGIC:
            raise ReferenceMismatchError(f"{path} is not a reference file")
        meta = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<f8")
    return meta, data.reshape(meta["shape"]).astype(float)


def reference_path(cfg: ExperimentConfig) -> Path:
    meta = reference_metadata(cfg)
    return Path(cfg.ref_dir) / f"{cfg.problem}-k{meta['k']}-ne{meta['ne']}-{meta['problem_hash'][:16]}.ref"


def generate_reference(cfg: ExperimentConfig, path: Path | None = None, reuse: bool = True) -> FieldState:
    """Run (or reload) the high-accuracy reference solution described by ``cfg``."""
    meta = reference_metadata(cfg)
    path = Path(path) if path is not None else reference_path(cfg)
    inst = build_problem(cfg, meta["k"], meta["ne"])
    if reuse and path.exists():
        stored, data = read_reference(path)
        stored.pop("shape", None)
        if stored != meta:
            raise ReferenceMismatchError(f"metadata of {path} does not match the requested reference")
        return inst.u0.with_vector(data)
    loop = TimeLoopConfig(cfg.ref_dt, cfg.final_time, krylov=cfg.krylov)
    result = integrate(inst.binding, inst.u0.as_vector(), cfg.ref_integrator, loop)
    state = inst.u0.with_vector(result.state)
    write_reference(path, state, meta)
    return state


def load_reference(path: Path) -> FieldState:
    """Rebuild the stored reference on its own mesh and basis."""
    meta, data = read_reference(path)
    kappa = meta["kappa"] if meta["problem"] != "euler-vortex" else None
    cfg = ExperimentConfig(problem=meta["problem"], k=meta["k"], ne=(meta["ne"],),
                           t_final=meta["t_final"], flux=meta["flux"], sigma=meta["sigma"],
                           kappa=kappa, quadrature=meta["quadrature"])
    inst = build_problem(cfg, meta["k"], meta["ne"])
    return inst.u0.with_vector(data)


# -- runs ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    scale: float
    errors: list
    orders: list
    cr_a: float
    cr_d: float
    krylov_iters: int
    wallclock_s: float
    status: str = "ok"


def _resolve_reference(cfg: ExperimentConfig, inst: ProblemInstance):
    mode = cfg.reference
    if mode == "auto":
        mode = "exact" if inst.exact is not None else "generate"
    if mode == "exact":
        if inst.exact is None:
            raise ConfigError(f"{cfg.problem} has no exact solution; use a generated reference")
        return inst.exact
    if mode == "generate":
        return generate_reference(cfg)
    return load_reference(Path(mode))


def run_point(cfg: ExperimentConfig, ne: int, dt: float, reference=None) -> tuple[ConvergenceRow, IntegrationResult | None]:
    inst = build_problem(cfg, cfg.k, ne)
    if reference is None:
        reference = _resolve_reference(cfg, inst)
    speed = inst.max_speed(inst.u0.as_vector())
    cr_a, cr_d = courant_numbers(inst.u0, dt, inst.mesh, inst.basis, inst.kappa, speed)
    loop = TimeLoopConfig(dt, cfg.final_time, relinearize=cfg.relinearize, krylov=cfg.krylov)
    scale = float(np.max(inst.mesh.widths[0])) if cfg.spatial_sweep else dt
    start = time.perf_counter()
    try:
        result = integrate(inst.binding, inst.u0, cfg.integrator, loop)
    except (BlowUpError, KrylovDivergenceError) as exc:
        status = "blowup" if isinstance(exc, BlowUpError) else "krylov-diverged"
        nan = [float("nan")] * len(inst.components)
        return ConvergenceRow(scale, nan, list(nan), cr_a, cr_d, 0,
                              time.perf_counter() - start, status), None
    wall = time.perf_counter() - start
    errs = l2_error(result.state, reference, cfg.final_time)
    row = ConvergenceRow(scale, [float(e) for e in errs], [float("nan")] * len(errs),
                         cr_a, cr_d, result.total_krylov_iterations, wall)
    return row, result


def fill_orders(rows: list[ConvergenceRow]) -> None:
    for i in range(1, len(rows)):
        a, b = rows[i - 1], rows[i]
        for c in range(len(b.errors)):
            ok = a.status == b.status == "ok" and a.errors[c] > 0 and b.errors[c] > 0 and a.scale != b.scale
            b.orders[c] = observed_order([a.errors[c], b.errors[c]], [a.scale, b.scale])[0] if ok else float("nan")


def components_of(cfg: ExperimentConfig) -> tuple:
    return ("rho", "rhou", "rhov", "rhoE") if cfg.problem == "euler-vortex" else ("u",)


def run_experiment(cfg: ExperimentConfig, reference=None) -> list[ConvergenceRow]:
    """Run every (ne, dt) point of the sweep, compute orders and optionally write CSV."""
    if reference is None and cfg.reference not in ("auto", "exact"):
        inst = build_problem(cfg, cfg.k, cfg.points()[0][0])
        reference = _resolve_reference(cfg, inst)
    rows = [run_point(cfg, ne, dt, reference)[0] for ne, dt in cfg.points()]
    fill_orders(rows)
    if cfg.out:
        write_csv(rows, cfg.out, components_of(cfg))
    return rows


def csv_header(components: Sequence[str]) -> list[str]:
    return (["scale"] + [f"error_{c}" for c in components] + [f"order_{c}" for c in components]
            + ["cr_a", "cr_d", "krylov_iters", "wallclock_s", "status"])


def _sci(v: float) -> str:
    # 17 significant digits round-trip every double
    return f"{float(v):.16e}"


def write_csv(rows: list[ConvergenceRow], path, components: Sequence[str]) -> None:
    path = Path(path)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(components))
        for r in rows:
            w.writerow([_sci(r.scale)] + [_sci(e) for e in r.errors] + [_sci(o) for o in r.orders]
                       + [_sci(r.cr_a), _sci(r.cr_d), str(int(r.krylov_iters)),
                          _sci(r.wallclock_s), r.status])


def read_csv(path) -> tuple[list[str], list[ConvergenceRow]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        comps = [h[len("error_"):] for h in header if h.startswith("error_")]
        nc = len(comps)
        rows = []
        for rec in reader:
            vals = rec
            rows.append(ConvergenceRow(float(vals[0]), [float(v) for v in vals[1:1 + nc]],
                                       [float(v) for v in vals[1 + nc:1 + 2 * nc]],
                                       float(vals[1 + 2 * nc]), float(vals[2 + 2 * nc]),
                                       int(vals[3 + 2 * nc]), float(vals[4 + 2 * nc]), vals[5 + 2 * nc]))
    return comps, rows
