"""CSV emission and the run manifest.

Fixed headers, 17-significant-digit numbers and no timestamps anywhere, so a
given configuration and seed reproduce every file byte for byte (the
wall_seconds column of sweep.csv is the documented exception).
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .core import bloch_vector, state_bloch
from .unravel import EnsembleResult, TrajectoryRecord

STATS_HEADER = [
    "t",
    "x_exact", "y_exact", "z_exact",
    "x_est", "y_est", "z_est",
    "x_stderr", "y_stderr", "z_stderr",
    "p0", "p1", "p_det",
    "entropy",
    "cumulative_jumps",
]
SCAN_HEADER = ["kappa", "theta", "positive"]
DOMAIN_HEADER = ["t", "domain_fraction", "basis_ok", "decomposable"]
SWEEP_HEADER = ["lambda", "entropy_mean", "jumps_total", "wall_seconds"]
REALIZATIONS_HEADER = ["traj", "t", "x", "y", "z"]
DETPATH_HEADER = ["t", "x", "y", "z"]


def fmt(value) -> str:
    """Serialize one cell: 17 significant digits for floats, '' for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _writer(path: Path):
    handle = open(path, "w", newline="")
    return handle, csv.writer(handle, lineterminator="\n")


def write_stats_csv(
    path: Path,
    grid: np.ndarray,
    exact_bloch: np.ndarray | None,
    result: EnsembleResult | None,
) -> None:
    """One row per output time; exact-only and ensemble-only runs leave cells empty."""
    occ_cols = [None, None, None]
    if result is not None and result.occupations is not None:
        keys = list(result.occupations)
        # p_det first by construction; the two pole labels follow in declared order
        pole_keys = [k for k in keys if k != "p_det"]
        occ_cols = [result.occupations.get(pole_keys[0]) if pole_keys else None,
                    result.occupations.get(pole_keys[1]) if len(pole_keys) > 1 else None,
                    result.occupations.get("p_det")]
    handle, writer = _writer(path)
    with handle:
        writer.writerow(STATS_HEADER)
        for i, t in enumerate(grid):
            row = [fmt(t)]
            for k in range(3):
                row.append(fmt(exact_bloch[i, k]) if exact_bloch is not None else "")
            if result is not None:
                row.extend(fmt(result.bloch[i, k]) for k in range(3))
                row.extend(fmt(result.stderr[i, k]) for k in range(3))
            else:
                row.extend([""] * 6)
            for col in occ_cols:
                row.append(fmt(col[i]) if col is not None else "")
            row.append(fmt(result.entropy[i]) if result is not None and result.entropy is not None else "")
            row.append(fmt(result.cumulative_jumps[i]) if result is not None else "")
            writer.writerow(row)


def write_scan_csv(path: Path, kappa_grid, theta_grid, positive) -> None:
    handle, writer = _writer(path)
    with handle:
        writer.writerow(SCAN_HEADER)
        for i, kappa in enumerate(kappa_grid):
            for j, theta in enumerate(theta_grid):
                writer.writerow([fmt(kappa), fmt(theta), fmt(bool(positive[i, j]))])


def write_domain_csv(path: Path, rows) -> None:
    handle, writer = _writer(path)
    with handle:
        writer.writerow(DOMAIN_HEADER)
        for row in rows:
            writer.writerow(
                [fmt(row.t), fmt(row.domain_fraction),
                 fmt(row.contains_orthonormal_basis), row.rho_decomposable]
            )


def write_sweep_csv(path: Path, rows: list[dict]) -> None:
    handle, writer = _writer(path)
    with handle:
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow(
                [fmt(row["lambda"]), fmt(row["entropy_mean"]),
                 fmt(row["jumps_total"]), fmt(row["wall_seconds"])]
            )


def write_realizations_csv(path: Path, records: list[TrajectoryRecord]) -> None:
    handle, writer = _writer(path)
    with handle:
        writer.writerow(REALIZATIONS_HEADER)
        for idx, rec in enumerate(records):
            for t, psi in zip(rec.sampled_times, rec.sampled_states):
                x, y, z = state_bloch(psi)
                writer.writerow([fmt(idx), fmt(t), fmt(x), fmt(y), fmt(z)])


def write_detpath_csv(path: Path, grid: np.ndarray, states: np.ndarray) -> None:
    handle, writer = _writer(path)
    with handle:
        writer.writerow(DETPATH_HEADER)
        for t, psi in zip(grid, states):
            x, y, z = state_bloch(psi)
            writer.writerow([fmt(t), fmt(x), fmt(y), fmt(z)])


def exact_bloch_series(rhos: np.ndarray) -> np.ndarray:
    return np.stack([bloch_vector(r) for r in rhos])


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def config_hash(config_doc: dict) -> str:
    canonical = json.dumps(config_doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_manifest(outdir: Path, config_doc: dict, seed: int, files: list[str]) -> Path:
    """Hash every emitted CSV into manifest.json alongside the config digest."""
    from . import __version__

    manifest = {
        "config_hash": config_hash(config_doc),
        "config": config_doc,
        "seed": int(seed),
        "versions": {
            "qtraj": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "files": {name: _sha256(outdir / name) for name in sorted(files)},
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
