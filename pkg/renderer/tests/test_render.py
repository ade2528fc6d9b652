"""Renderer tests, including the acceptance check (criterion 10): the four
figure kinds render from real engine outputs without error and leave the
input CSVs byte-identical.

The engine outputs are produced through its public CLI (the only interface
the renderer knows about), at desk scale.
"""

import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from figrender import FigureSpec, SchemaError, render


def run_engine(args: list[str]) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "qtraj.cli", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr


@pytest.fixture(scope="module")
def engine_outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    enm_cfg = {
        "model": {"name": "enm"},
        "method": "psi_roqj",
        "policy": {"name": "ph_cov_poles", "parameters": {"mixing_lambda": 0.5}},
        "initial_state": {"named": "plus"},
        "grid": {"t_max": 1.0, "dt": 1e-3, "output_stride": 25},
        "ensemble": {"n_traj": 200, "base_seed": 5, "workers": 1},
        "realizations": 5,
        "sweep": {"lambdas": [0.0, 0.5, 1.0]},
    }
    driven_cfg = {
        "model": {"name": "driven", "parameters": {"gamma": 1.0, "beta": 10.0}},
        "method": "psi_roqj",
        "policy": {"name": "driven_xi"},
        "initial_state": {"named": "zero"},
        "grid": {"t_max": 1.0, "dt": 1e-3, "output_stride": 25},
        "ensemble": {"n_traj": 200, "base_seed": 6, "workers": 1},
    }
    scan_cfg = {
        "model": {"name": "oscillating_dephasing", "parameters": {"kappa": 1.0}},
        "policy": {"name": "theta_switch"},
        "grid": {"t_max": 1.0, "dt": 1e-2},
        "scan": {
            "theta_bar": 1.3,
            "kappas": [0.9, 1.1, 1.3],
            "theta_points": 9,
            "t_max": 4.0,
            "dt": 5e-3,
        },
    }
    paths = {}
    for name, cfg, command in (
        ("enm", enm_cfg, "unravel"),
        ("sweep", enm_cfg, "lambda-sweep"),
        ("driven", driven_cfg, "unravel"),
        ("scan", scan_cfg, "scan"),
    ):
        out = root / name
        cfg_path = root / f"{name}.json"
        cfg_path.write_text(json.dumps(cfg))
        run_engine([command, "--config", str(cfg_path), "--out", str(out)])
        paths[name] = out
    return paths


def hash_tree(paths):
    return {
        str(p): hashlib.sha256(p.read_bytes()).hexdigest()
        for run in paths.values()
        for p in Path(run).glob("*.csv")
    }


def test_all_four_kinds_render_and_inputs_unchanged(engine_outputs, tmp_path):
    before = hash_tree(engine_outputs)
    specs = [
        FigureSpec(
            kind="timeseries",
            inputs=[
                str(engine_outputs["enm"] / "stats.csv"),
                str(engine_outputs["enm"] / "realizations.csv"),
            ],
            output=str(tmp_path / "timeseries.png"),
        ),
        FigureSpec(
            kind="sweep",
            inputs=[str(engine_outputs["sweep"] / "sweep.csv")],
            output=str(tmp_path / "sweep.png"),
        ),
        FigureSpec(
            kind="bloch3d",
            inputs=[
                str(engine_outputs["driven"] / "stats.csv"),
                str(engine_outputs["driven"] / "detpath.csv"),
            ],
            output=str(tmp_path / "bloch3d.png"),
        ),
        FigureSpec(
            kind="scanmap",
            inputs=[str(engine_outputs["scan"] / "scan.csv")],
            output=str(tmp_path / "scanmap.png"),
        ),
    ]
    for spec in specs:
        out = render(spec)
        assert out.exists() and out.stat().st_size > 0, spec.kind
    assert hash_tree(engine_outputs) == before  # inputs byte-unchanged
    print("\nACCEPTANCE 10 PASS: four figure kinds rendered; inputs unchanged")


def test_cli_entry_point(engine_outputs, tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(
        json.dumps(
            {
                "kind": "timeseries",
                "inputs": [str(engine_outputs["enm"] / "stats.csv")],
                "output": str(tmp_path / "cli.png"),
                "overlay_realizations": 0,
            }
        )
    )
    from figrender.render import main

    assert main(["--spec", str(spec_path)]) == 0
    assert (tmp_path / "cli.png").exists()


def test_header_mismatch_writes_nothing(tmp_path):
    bad = tmp_path / "stats.csv"
    bad.write_text("wrong,header\n1,2\n")
    out = tmp_path / "fig.png"
    spec = FigureSpec(kind="timeseries", inputs=[str(bad)], output=str(out))
    with pytest.raises(SchemaError):
        render(spec)
    assert not out.exists()


def test_empty_body_writes_nothing(tmp_path):
    empty = tmp_path / "scan.csv"
    empty.write_text("kappa,theta,positive\n")
    out = tmp_path / "fig.png"
    spec = FigureSpec(kind="scanmap", inputs=[str(empty)], output=str(out))
    with pytest.raises(SchemaError):
        render(spec)
    assert not out.exists()


def test_missing_input_named(tmp_path):
    spec = FigureSpec(kind="sweep", inputs=[str(tmp_path / "stats.csv")],
                      output=str(tmp_path / "fig.png"))
    with pytest.raises(SchemaError, match="sweep.csv"):
        render(spec)


def test_spec_validation():
    with pytest.raises(SchemaError):
        FigureSpec.from_dict({"kind": "pie", "inputs": ["a"], "output": "b"})
    with pytest.raises(SchemaError):
        FigureSpec.from_dict({"kind": "sweep", "inputs": [], "output": "b"})
    with pytest.raises(SchemaError):
        FigureSpec.from_dict({"kind": "sweep", "inputs": ["a"]})


def test_deterministic_output(engine_outputs, tmp_path):
    spec1 = FigureSpec(
        kind="scanmap",
        inputs=[str(engine_outputs["scan"] / "scan.csv")],
        output=str(tmp_path / "a.png"),
    )
    spec2 = FigureSpec(
        kind="scanmap",
        inputs=[str(engine_outputs["scan"] / "scan.csv")],
        output=str(tmp_path / "b.png"),
    )
    a = render(spec1).read_bytes()
    b = render(spec2).read_bytes()
    assert a == b
