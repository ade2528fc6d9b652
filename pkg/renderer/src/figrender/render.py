"""Render the trajectory-engine CSV outputs into the standard figure families.

Four figure kinds, selected by a small JSON spec file:

  timeseries - Bloch components against time: exact curves solid, ensemble
               estimates as markers, a configurable number of sample
               realizations in a light shade (stats.csv + realizations.csv).
  sweep      - mean entropy, total jumps and wall time against the mixing
               parameter (sweep.csv).
  bloch3d    - three-dimensional Bloch-sphere trajectory of the ensemble
               average and of the deterministic track (stats.csv +
               detpath.csv).
  scanmap    - kappa-theta positivity map (scan.csv).

The renderer is read-only on its inputs and never writes an image when a CSV
does not match the documented header contract.  Spec file:

  {"kind": "timeseries", "inputs": ["run/stats.csv", "run/realizations.csv"],
   "output": "fig.png", "overlay_realizations": 5}
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STATS_HEADER = [
    "t",
    "x_exact", "y_exact", "z_exact",
    "x_est", "y_est", "z_est",
    "x_stderr", "y_stderr", "z_stderr",
    "p0", "p1", "p_det",
    "entropy",
    "cumulative_jumps",
]
REALIZATIONS_HEADER = ["traj", "t", "x", "y", "z"]
DETPATH_HEADER = ["t", "x", "y", "z"]
SWEEP_HEADER = ["lambda", "entropy_mean", "jumps_total", "wall_seconds"]
SCAN_HEADER = ["kappa", "theta", "positive"]

KINDS = ("timeseries", "sweep", "bloch3d", "scanmap")


class SchemaError(Exception):
    """A CSV input does not match the documented header contract."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    overlay_realizations: int = 5

    @classmethod
    def from_file(cls, path: str | Path) -> "FigureSpec":
        doc = json.loads(Path(path).read_text())
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "FigureSpec":
        if doc.get("kind") not in KINDS:
            raise SchemaError(f"figure kind must be one of {KINDS}, got {doc.get('kind')}")
        if not doc.get("inputs"):
            raise SchemaError("figure spec needs a nonempty 'inputs' list")
        if not doc.get("output"):
            raise SchemaError("figure spec needs an 'output' path")
        return cls(
            kind=doc["kind"],
            inputs=[str(p) for p in doc["inputs"]],
            output=str(doc["output"]),
            overlay_realizations=int(doc.get("overlay_realizations", 5)),
        )


def _read_table(path: str | Path, expected_header: list[str]) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input CSV '{path}' does not exist")
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != expected_header:
        raise SchemaError(
            f"'{path.name}' header mismatch: expected {expected_header}, "
            f"got {rows[0] if rows else 'empty file'}"
        )
    body = rows[1:]
    if not body:
        raise SchemaError(f"'{path.name}' has no data rows")
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(expected_header):
        cells = [row[j] for row in body]
        if all(c == "" for c in cells):
            columns[name] = np.full(len(cells), np.nan)
        elif name == "positive":
            columns[name] = np.array([c == "true" for c in cells])
        elif name == "decomposable":
            columns[name] = np.array(cells)
        else:
            columns[name] = np.array([float(c) if c != "" else np.nan for c in cells])
    return columns


def _find_input(spec: FigureSpec, filename: str, required: bool = True) -> str | None:
    for path in spec.inputs:
        if Path(path).name == filename:
            return path
    if required:
        raise SchemaError(f"figure kind '{spec.kind}' needs an input named '{filename}'")
    return None


def _save(fig, spec: FigureSpec) -> Path:
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, metadata={"Software": "figrender"})
    plt.close(fig)
    return out


def _render_timeseries(spec: FigureSpec):
    stats = _read_table(_find_input(spec, "stats.csv"), STATS_HEADER)
    real_path = _find_input(spec, "realizations.csv", required=False)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    t = stats["t"]
    if real_path is not None and spec.overlay_realizations > 0:
        real = _read_table(real_path, REALIZATIONS_HEADER)
        shown = 0
        for idx in np.unique(real["traj"]):
            if shown >= spec.overlay_realizations:
                break
            mask = real["traj"] == idx
            ax.plot(real["t"][mask], real["z"][mask], color="#9db8e8", lw=0.7, zorder=1)
            ax.plot(real["t"][mask], real["x"][mask], color="#b8dbb8", lw=0.7, zorder=1)
            shown += 1
    have_exact = not np.isnan(stats["x_exact"]).all()
    if have_exact:
        ax.plot(t, stats["z_exact"], "-", color="tab:blue", lw=2, label="z exact")
        ax.plot(t, stats["x_exact"], "--", color="tab:green", lw=2, label="x exact")
    if not np.isnan(stats["x_est"]).all():
        stride = max(1, len(t) // 60)
        ax.plot(t[::stride], stats["z_est"][::stride], "o", ms=3.5,
                color="tab:blue", label="z ensemble")
        ax.plot(t[::stride], stats["x_est"][::stride], "s", ms=3.5,
                color="tab:green", label="x ensemble")
    ax.set_xlabel("t")
    ax.set_ylabel("Bloch components")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("trajectory ensemble vs exact evolution")
    return _save(fig, spec)


def _render_sweep(spec: FigureSpec):
    sweep = _read_table(_find_input(spec, "sweep.csv"), SWEEP_HEADER)
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    lam = sweep["lambda"]
    axes[0].plot(lam, sweep["entropy_mean"], "o-")
    axes[0].set_xlabel("mixing parameter")
    axes[0].set_ylabel("mean occupation entropy (bits)")
    axes[1].plot(lam, sweep["jumps_total"], "o-", color="tab:red")
    axes[1].set_xlabel("mixing parameter")
    axes[1].set_ylabel("total jumps")
    axes[2].plot(lam, sweep["wall_seconds"], "o-", color="tab:purple", label="wall time")
    twin = axes[2].twinx()
    twin.plot(lam, sweep["jumps_total"], "o:", color="tab:red", label="jumps")
    axes[2].set_xlabel("mixing parameter")
    axes[2].set_ylabel("wall seconds")
    twin.set_ylabel("total jumps")
    fig.tight_layout()
    return _save(fig, spec)


def _render_bloch3d(spec: FigureSpec):
    stats = _read_table(_find_input(spec, "stats.csv"), STATS_HEADER)
    det_path = _find_input(spec, "detpath.csv", required=False)
    fig = plt.figure(figsize=(5.5, 5.5))
    ax = fig.add_subplot(projection="3d")
    u, v = np.meshgrid(np.linspace(0, 2 * np.pi, 25), np.linspace(0, np.pi, 13))
    ax.plot_wireframe(
        np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v),
        color="0.85", lw=0.3,
    )
    if not np.isnan(stats["x_est"]).all():
        ax.plot(stats["x_est"], stats["y_est"], stats["z_est"],
                "k--", lw=1.2, label="ensemble average")
    elif not np.isnan(stats["x_exact"]).all():
        ax.plot(stats["x_exact"], stats["y_exact"], stats["z_exact"],
                "k--", lw=1.2, label="exact state")
    if det_path is not None:
        det = _read_table(det_path, DETPATH_HEADER)
        ax.plot(det["x"], det["y"], det["z"], color="tab:orange", lw=1.2,
                label="deterministic state")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.legend(loc="upper left", fontsize=8)
    return _save(fig, spec)


def _render_scanmap(spec: FigureSpec):
    scan = _read_table(_find_input(spec, "scan.csv"), SCAN_HEADER)
    kappas = np.unique(scan["kappa"])
    thetas = np.unique(scan["theta"])
    grid = np.full((len(kappas), len(thetas)), np.nan)
    k_index = {k: i for i, k in enumerate(kappas)}
    t_index = {t: j for j, t in enumerate(thetas)}
    for k, th, pos in zip(scan["kappa"], scan["theta"], scan["positive"]):
        grid[k_index[k], t_index[th]] = 1.0 if pos else 0.0
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(
        thetas, kappas, grid, cmap="RdYlGn", vmin=0, vmax=1, shading="nearest"
    )
    fig.colorbar(mesh, ax=ax, label="positive unraveling")
    ax.set_xlabel("initial-state angle")
    ax.set_ylabel("kappa")
    ax.set_title("positivity of the switch-policy unraveling")
    return _save(fig, spec)


_RENDERERS = {
    "timeseries": _render_timeseries,
    "sweep": _render_sweep,
    "bloch3d": _render_bloch3d,
    "scanmap": _render_scanmap,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; raises SchemaError before writing on bad inputs."""
    return _RENDERERS[spec.kind](spec)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figrender", description="render qtraj CSV outputs to figures"
    )
    parser.add_argument("--spec", required=True, help="path to the figure spec JSON")
    args = parser.parse_args(argv)
    try:
        out = render(FigureSpec.from_file(args.spec))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
