"""Run configuration: a single JSON document driving every subcommand.

Schema (all sections except the ones a subcommand needs may be omitted):

{
  "model":   {"name": "enm", "parameters": {...}},
  "method":  "psi_roqj" | "mcwf" | "w_roqj" | "r_roqj",
  "policy":  {"name": "ph_cov_poles", "parameters":
              {"mixing_lambda": 0.5, "epsilon": 0.0, "theta_bar": 1.3,
               "xi_selector": 0.5, "selector": 0.5, "c11": ..., "c": "zero"}},
  "initial_state": {"theta": 0.785} | {"amplitudes": [[re, im], [re, im]]}
                   | {"named": "plus" | "minus" | "zero" | "one"},
  "grid":    {"t_max": 5.0, "dt": 1e-3, "output_stride": 10},
  "ensemble": {"n_traj": 1000, "base_seed": 7, "workers": 1},
  "outputs": "runs/out",
  "engine": "auto" | "label" | "generic",
  "integrator": "rk4" | "euler",
  "realizations": 5,
  "scan":  {"theta_bar": 1.3, "kappas": [...] | {"min":..,"max":..,"step":..},
            "theta_points": 31, "t_max": 10.0, "dt": 2e-3, "epsilon": 0.0},
  "sweep": {"lambdas": [0.0, ...]},
  "domain": {"samples": 2048, "stride": 50},
  "numerics": {<NumericPolicy field overrides>}
}

Numbers in emitted CSVs carry 17 significant digits, so identical
configuration plus seed reproduces output files byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import KET_MINUS, KET_PLUS, KET_0, KET_1, normalize, theta_state
from .errors import ConfigError
from .master import time_grid
from .numeric import DEFAULT_NUMERIC, NumericPolicy
from .unravel import PolicyContext
from .zoo import MODEL_NAMES, POLICY_NAMES, ModelBundle, build_model, build_policy

METHODS = ("mcwf", "w_roqj", "r_roqj", "psi_roqj")
_NAMED_STATES = {"zero": KET_0, "one": KET_1, "plus": KET_PLUS, "minus": KET_MINUS}


@dataclass
class RunConfig:
    raw: dict
    model_name: str
    model_params: dict
    method: str
    policy_name: str | None
    policy_params: dict
    initial_state: np.ndarray
    initial_theta: float
    t_max: float
    dt: float
    output_stride: int
    n_traj: int
    base_seed: int
    workers: int
    outputs: str | None
    engine: str = "auto"
    integrator: str = "rk4"
    realizations: int = 5
    scan: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    domain: dict = field(default_factory=dict)
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def grid(self) -> np.ndarray:
        return time_grid(self.t_max, self.dt)

    def bundle(self) -> ModelBundle:
        return build_model(self.model_name, self.model_params)

    def policy(self, bundle: ModelBundle):
        if self.policy_name is None:
            return None
        return build_policy(self.policy_name, bundle, self.policy_params)

    def context(self) -> PolicyContext:
        p = self.policy_params
        try:
            return PolicyContext(
                initial_theta=self.initial_theta,
                mixing_lambda=float(p.get("mixing_lambda", 0.5)),
                epsilon_shrink=float(p.get("epsilon", 0.0)),
                theta_bar=float(p.get("theta_bar", 1.3)),
                xi_selector=float(p.get("xi_selector", 0.5)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad policy parameters: {exc}") from exc


def _section(doc: dict, name: str, required: bool) -> dict:
    if name not in doc:
        if required:
            raise ConfigError(f"missing required config section '{name}'")
        return {}
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"config section '{name}' must be an object")
    return sec


def _need(section: dict, section_name: str, key: str):
    if key not in section:
        raise ConfigError(f"missing field '{section_name}.{key}'")
    return section[key]


def _positive_number(value, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"field '{name}' must be a positive number")
    return float(value)


def _initial_state(doc: dict) -> tuple[np.ndarray, float]:
    sec = _section(doc, "initial_state", required=False)
    if not sec:
        psi = KET_PLUS.copy()
    elif "theta" in sec:
        psi = theta_state(float(sec["theta"]))
    elif "named" in sec:
        name = sec["named"]
        if name not in _NAMED_STATES:
            raise ConfigError(
                f"unknown named state '{name}'; options: {sorted(_NAMED_STATES)}"
            )
        psi = _NAMED_STATES[name].copy()
    elif "amplitudes" in sec:
        amps = sec["amplitudes"]
        try:
            psi = np.array([complex(re, im) for re, im in amps])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"initial_state.amplitudes malformed: {exc}") from exc
        psi = normalize(psi)
    else:
        raise ConfigError("initial_state needs one of 'theta', 'named', 'amplitudes'")
    theta = float(np.arccos(np.clip(abs(psi[0]), 0.0, 1.0)))
    return psi, theta


def parse_config(source: dict | str | Path) -> RunConfig:
    """Validate a config document (dict, JSON text, or file path)."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if path.exists():
            text = path.read_text()
        elif isinstance(source, str) and source.lstrip().startswith("{"):
            text = source
        else:
            raise ConfigError(f"config file '{source}' not found")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    model_sec = _section(doc, "model", required=True)
    model_name = _need(model_sec, "model", "name")
    if model_name not in MODEL_NAMES:
        raise ConfigError(f"unknown model '{model_name}'; options: {MODEL_NAMES}")
    model_params = model_sec.get("parameters", {}) or {}

    method = doc.get("method", "psi_roqj")
    if method not in METHODS:
        raise ConfigError(f"unknown method '{method}'; options: {METHODS}")

    policy_sec = _section(doc, "policy", required=False)
    policy_name = policy_sec.get("name")
    if policy_name is not None and policy_name not in POLICY_NAMES:
        raise ConfigError(f"unknown policy '{policy_name}'; options: {POLICY_NAMES}")
    if method in ("psi_roqj", "r_roqj") and policy_name is None:
        raise ConfigError(f"method '{method}' requires a 'policy' section with a name")
    policy_params = policy_sec.get("parameters", {}) or {}

    grid_sec = _section(doc, "grid", required=True)
    t_max = _positive_number(_need(grid_sec, "grid", "t_max"), "grid.t_max")
    dt = _positive_number(_need(grid_sec, "grid", "dt"), "grid.dt")
    stride = int(grid_sec.get("output_stride", 1))
    if stride < 1:
        raise ConfigError("grid.output_stride must be >= 1")

    ens_sec = _section(doc, "ensemble", required=False)
    n_traj = int(ens_sec.get("n_traj", 0)) if ens_sec else 0
    base_seed = int(ens_sec.get("base_seed", 0)) if ens_sec else 0
    workers = int(ens_sec.get("workers", 1)) if ens_sec else 1
    if ens_sec:
        if "n_traj" not in ens_sec:
            raise ConfigError("missing field 'ensemble.n_traj'")
        if n_traj < 1:
            raise ConfigError("ensemble.n_traj must be >= 1")
        if "base_seed" not in ens_sec:
            raise ConfigError("missing field 'ensemble.base_seed'")
        if not 0 <= base_seed < 2**64:
            raise ConfigError("ensemble.base_seed must fit in 64 bits")
        if workers < 1:
            raise ConfigError("ensemble.workers must be >= 1")

    psi0, theta0 = _initial_state(doc)

    engine = doc.get("engine", "auto")
    if engine not in ("auto", "label", "generic"):
        raise ConfigError("engine must be auto, label, or generic")
    integrator = doc.get("integrator", "rk4")
    if integrator not in ("rk4", "euler"):
        raise ConfigError("integrator must be rk4 or euler")

    numeric = DEFAULT_NUMERIC
    if "numerics" in doc:
        try:
            numeric = DEFAULT_NUMERIC.with_overrides(**doc["numerics"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numerics overrides: {exc}") from exc

    return RunConfig(
        raw=doc,
        model_name=model_name,
        model_params=model_params,
        method=method,
        policy_name=policy_name,
        policy_params=policy_params,
        initial_state=psi0,
        initial_theta=theta0,
        t_max=t_max,
        dt=dt,
        output_stride=stride,
        n_traj=n_traj,
        base_seed=base_seed,
        workers=workers,
        outputs=doc.get("outputs"),
        engine=engine,
        integrator=integrator,
        realizations=int(doc.get("realizations", 5)),
        scan=_section(doc, "scan", required=False),
        sweep=_section(doc, "sweep", required=False),
        domain=_section(doc, "domain", required=False),
        numeric=numeric,
    )


def require_ensemble(cfg: RunConfig) -> None:
    if cfg.n_traj < 1:
        raise ConfigError("missing field 'ensemble.n_traj' (ensemble section required)")
