"""Command-line front end: ``python -m expdg run ...`` and ``python -m expdg reference ...``.

Settings come from an optional flat ``key = value`` file (``--config``) and are
overridden by command-line flags. ``--ne`` and ``--dt`` accept comma-separated
sweeps.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .harness import (ConfigError, ExperimentConfig, PROBLEMS, components_of, csv_header,
                      generate_reference, reference_path, run_experiment)
from .integrators import INTEGRATOR_KINDS

# config key -> (ExperimentConfig field, parser)
_KEYS = {
    "problem": ("problem", str),
    "integrator": ("integrator", str),
    "k": ("k", int),
    "ne": ("ne", str),
    "dt": ("dt", str),
    "tfinal": ("t_final", float),
    "t_final": ("t_final", float),
    "flux": ("flux", str),
    "sigma": ("sigma", lambda s: s if s == "shock-adaptive" else float(s)),
    "kappa": ("kappa", float),
    "quadrature": ("quadrature", str),
    "reference": ("reference", str),
    "ref_integrator": ("ref_integrator", str),
    "ref_dt": ("ref_dt", float),
    "ref_k": ("ref_k", int),
    "ref_ne": ("ref_ne", int),
    "ref_dir": ("ref_dir", str),
    "krylov_tol": ("krylov_tol", float),
    "krylov_max_basis": ("krylov_max_basis", int),
    "relinearize": ("relinearize", str),
    "out": ("out", str),
}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(settings: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in settings.items():
        if value is None:
            continue
        name, conv = _KEYS[key]
        try:
            kwargs[name] = conv(value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return ExperimentConfig(**kwargs)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--integrator", choices=INTEGRATOR_KINDS)
    p.add_argument("--k", type=int)
    p.add_argument("--ne", help="element count(s), comma separated")
    p.add_argument("--dt", help="time step(s), comma separated")
    p.add_argument("--tfinal", type=float)
    p.add_argument("--flux", help="LF or EF for Burgers, roe or lf for Euler")
    p.add_argument("--sigma", help="EF penalty or 'shock-adaptive'")
    p.add_argument("--kappa", type=float)
    p.add_argument("--quadrature", choices=("over", "collocation"))
    p.add_argument("--ref-integrator", dest="ref_integrator")
    p.add_argument("--ref-dt", dest="ref_dt", type=float)
    p.add_argument("--ref-k", dest="ref_k", type=int)
    p.add_argument("--ref-ne", dest="ref_ne", type=int)
    p.add_argument("--ref-dir", dest="ref_dir")
    p.add_argument("--krylov-tol", dest="krylov_tol", type=float)
    p.add_argument("--out")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expdg", description="Exponential DG experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a convergence or stability sweep and write CSV")
    _add_common(run)
    run.add_argument("--reference", help="'exact', 'generate' or a stored reference file")
    ref = sub.add_parser("reference", help="generate (or verify) a stored reference solution")
    _add_common(ref)
    ref.add_argument("--force", action="store_true", help="recompute even if the file exists")
    return parser


def settings_from_args(args: argparse.Namespace) -> dict:
    settings = parse_config_file(args.config) if args.config else {}
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.4e}"


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(settings_from_args(args))
        if args.command == "reference":
            out = Path(args.out) if args.out else reference_path(cfg)
            generate_reference(cfg, out, reuse=not args.force)
            print(out)
            return 0
        rows = run_experiment(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    comps = components_of(cfg)
    print(", ".join(csv_header(comps)))
    for r in rows:
        cells = [_fmt(r.scale)] + [_fmt(e) for e in r.errors] + [f"{o:.3f}" for o in r.orders]
        cells += [_fmt(r.cr_a), _fmt(r.cr_d), str(r.krylov_iters), f"{r.wallclock_s:.2f}", r.status]
        print(", ".join(cells))
    return 0 if all(r.status == "ok" for r in rows) else 1
