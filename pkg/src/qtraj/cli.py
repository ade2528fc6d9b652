"""Command-line harness: exact, unravel, scan, domain, lambda-sweep.

Every run writes its CSV outputs plus a manifest.json naming each file with a
content hash; identical configuration and seed give byte-identical CSVs for
any worker count.  A PositivityViolation aborts with exit status 3 and one
diagnostic row (t, Bloch coordinates of the offending state, minimal
eigenvalue) on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_config, require_ensemble
from .core import state_bloch
from .divisibility import necessary_conditions_report
from .errors import ConfigError, PositivityViolation, QtrajError
from .master import exact_solve, time_grid, validate_model
from .stats import (
    exact_bloch_series,
    write_detpath_csv,
    write_domain_csv,
    write_manifest,
    write_realizations_csv,
    write_scan_csv,
    write_stats_csv,
    write_sweep_csv,
)
from .unravel import run_ensemble
from .zoo import kappa_scan


def _outdir(cfg: RunConfig, override: str | None) -> Path:
    target = override or cfg.outputs
    if not target:
        raise ConfigError("no output directory: set 'outputs' in the config or pass --out")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.base_seed = args.seed
        cfg.raw.setdefault("ensemble", {})["base_seed"] = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "method", None):
        cfg.method = args.method
        cfg.raw["method"] = args.method
    return cfg


def cmd_exact(cfg: RunConfig, outdir: Path) -> int:
    bundle = cfg.bundle()
    grid = cfg.grid()
    validate_model(bundle.model, grid, cfg.numeric)
    rhos = exact_solve(bundle.model, _initial_rho(cfg), grid, cfg.numeric)
    sample = np.arange(0, len(grid), cfg.output_stride)
    if sample[-1] != len(grid) - 1:
        sample = np.append(sample, len(grid) - 1)
    write_stats_csv(outdir / "stats.csv", grid[sample], exact_bloch_series(rhos[sample]), None)
    write_manifest(outdir, cfg.raw, cfg.base_seed, ["stats.csv"])
    return 0


def _initial_rho(cfg: RunConfig) -> np.ndarray:
    psi = cfg.initial_state
    return np.outer(psi, psi.conj())


def cmd_unravel(cfg: RunConfig, outdir: Path) -> int:
    require_ensemble(cfg)
    bundle = cfg.bundle()
    grid = cfg.grid()
    validate_model(bundle.model, grid, cfg.numeric)
    policy = cfg.policy(bundle)
    result = run_ensemble(
        bundle.model,
        cfg.method,
        policy,
        cfg.initial_state,
        grid,
        n_traj=cfg.n_traj,
        base_seed=cfg.base_seed,
        worker_count=cfg.workers,
        ctx=cfg.context(),
        output_stride=cfg.output_stride,
        numeric=cfg.numeric,
        integrator=cfg.integrator,
        engine=cfg.engine,
        realization_count=cfg.realizations,
    )
    rhos = exact_solve(bundle.model, _initial_rho(cfg), grid, cfg.numeric)
    sample = np.arange(0, len(grid), cfg.output_stride)
    if sample[-1] != len(grid) - 1:
        sample = np.append(sample, len(grid) - 1)
    files = ["stats.csv"]
    write_stats_csv(outdir / "stats.csv", result.grid, exact_bloch_series(rhos[sample]), result)
    if result.realizations:
        write_realizations_csv(outdir / "realizations.csv", result.realizations)
        files.append("realizations.csv")
    if result.det_states is not None:
        write_detpath_csv(outdir / "detpath.csv", result.grid, result.det_states)
        files.append("detpath.csv")
    write_manifest(outdir, cfg.raw, cfg.base_seed, files)
    print(
        f"unravel: {cfg.n_traj} trajectories, {result.jump_count_total} jumps, "
        f"{result.wall_time:.2f}s ensemble wall time"
    )
    return 0


def cmd_scan(cfg: RunConfig, outdir: Path) -> int:
    sec = cfg.scan
    if not sec:
        raise ConfigError("missing required config section 'scan'")
    theta_bar = float(sec.get("theta_bar", 1.3))
    if "kappas" in sec:
        spec = sec["kappas"]
        if isinstance(spec, dict):
            kappas = np.arange(
                float(spec["min"]), float(spec["max"]) + 1e-12, float(spec.get("step", 0.05))
            )
        else:
            kappas = np.asarray([float(k) for k in spec])
    else:
        raise ConfigError("missing field 'scan.kappas'")
    n_theta = int(sec.get("theta_points", 31))
    thetas = np.linspace(0.0, np.pi / 2.0, n_theta)
    result = kappa_scan(
        theta_bar,
        kappas,
        thetas,
        n_traj=int(sec.get("n_traj", 1)),
        t_max=float(sec.get("t_max", 10.0)),
        dt=float(sec.get("dt", 2e-3)),
        base_seed=cfg.base_seed,
        worker_count=cfg.workers,
        eps_shrink=float(sec.get("epsilon", 0.0)),
        rate_clip=cfg.numeric.rate_clip,
    )
    write_scan_csv(outdir / "scan.csv", result.kappa_grid, result.theta_grid, result.positive)
    write_manifest(outdir, cfg.raw, cfg.base_seed, ["scan.csv"])
    print(
        f"scan: kappa_max_estimate={result.kappa_max_estimate:g} "
        f"bracket=({result.kappa_max_bracket[0]:g}, {result.kappa_max_bracket[1]:g})"
    )
    return 0


def cmd_domain(cfg: RunConfig, outdir: Path) -> int:
    bundle = cfg.bundle()
    grid = cfg.grid()
    validate_model(bundle.model, grid, cfg.numeric)
    rhos = exact_solve(bundle.model, _initial_rho(cfg), grid, cfg.numeric)
    stride = int(cfg.domain.get("stride", cfg.output_stride))
    samples = int(cfg.domain.get("samples", 2048))
    sample = np.arange(0, len(grid), stride)
    if sample[-1] != len(grid) - 1:
        sample = np.append(sample, len(grid) - 1)
    rows = necessary_conditions_report(
        bundle.model, grid[sample], rhos[sample], samples, cfg.numeric
    )
    write_domain_csv(outdir / "domain.csv", rows)
    write_manifest(outdir, cfg.raw, cfg.base_seed, ["domain.csv"])
    return 0


def lambda_sweep(cfg: RunConfig, lambdas) -> list[dict]:
    """Per-lambda ensemble summaries: mean entropy, total jumps, wall seconds.

    Wall time covers the ensemble run only (file writes excluded); the column
    is environment-dependent and not part of byte-identity expectations.
    """
    require_ensemble(cfg)
    bundle = cfg.bundle()
    grid = cfg.grid()
    policy = cfg.policy(bundle)
    if policy is None:
        raise ConfigError("lambda-sweep requires a policy with mixing_lambda support")
    rows = []
    for lam in lambdas:
        ctx = cfg.context()
        ctx.mixing_lambda = float(lam)
        result = run_ensemble(
            bundle.model, cfg.method, policy, cfg.initial_state, grid,
            n_traj=cfg.n_traj, base_seed=cfg.base_seed, worker_count=cfg.workers,
            ctx=ctx, output_stride=cfg.output_stride, numeric=cfg.numeric,
            integrator=cfg.integrator, engine=cfg.engine,
        )
        entropy_mean = float(result.entropy.mean()) if result.entropy is not None else 0.0
        rows.append(
            {
                "lambda": float(lam),
                "entropy_mean": entropy_mean,
                "jumps_total": result.jump_count_total,
                "wall_seconds": result.wall_time,
            }
        )
    return rows


def cmd_lambda_sweep(cfg: RunConfig, outdir: Path) -> int:
    sec = cfg.sweep
    if not sec or "lambdas" not in sec:
        raise ConfigError("missing field 'sweep.lambdas'")
    rows = lambda_sweep(cfg, [float(x) for x in sec["lambdas"]])
    write_sweep_csv(outdir / "sweep.csv", rows)
    write_manifest(outdir, cfg.raw, cfg.base_seed, ["sweep.csv"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtraj", description="stochastic quantum-jump trajectory engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("exact", "integrate the master equation only"),
        ("unravel", "run a trajectory ensemble against the exact oracle"),
        ("scan", "kappa-theta positivity map of the theta-switch unraveling"),
        ("domain", "positivity-domain report along the exact evolution"),
        ("lambda-sweep", "entropy/jump statistics versus the mixing parameter"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="override ensemble.base_seed")
        p.add_argument("--workers", type=int, default=None, help="override ensemble.workers")
        p.add_argument("--method", default=None, help="override the unraveling method")
    return parser


_COMMANDS = {
    "exact": cmd_exact,
    "unravel": cmd_unravel,
    "scan": cmd_scan,
    "domain": cmd_domain,
    "lambda-sweep": cmd_lambda_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(parse_config(args.config), args)
        outdir = _outdir(cfg, args.out)
        return _COMMANDS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PositivityViolation as exc:
        x, y, z = state_bloch(np.asarray(exc.psi))
        print(f"positivity violation: {exc}", file=sys.stderr)
        print(
            f"t,x,y,z,min_eigenvalue\n{exc.t:.17g},{x:.17g},{y:.17g},{z:.17g},"
            f"{exc.min_eigenvalue:.17g}",
            file=sys.stderr,
        )
        return 3
    except QtrajError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
