"""Time-local master equations and the exact reference integrator.

A model is d rho/dt = -i[H(t), rho] + sum_a g_a(t) L_a rho L_a^dag
- 1/2 {Gamma(t), rho} with Gamma = sum_a g_a L_a^dag L_a.  Rates may go
negative (time-local non-Markovian generators).  The generator splits into a
jump part J_t[rho] = sum_a g_a L_a rho L_a^dag and a driving part generated by
the non-Hermitian K(t) = H(t) - (i/2) Gamma(t); the split is gauge dependent:
for any C(t),

    J'[rho] = J[rho] + (C rho + rho C^dag)/2,   K' = K - (i/2) C

leaves the generator unchanged.  That invariance is what the jump engines
exploit, so it is exposed (and property-tested) here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import StepSizeError
from .numeric import DEFAULT_NUMERIC, NumericPolicy
from .core import require_density_matrix, require_hermitian

RateFunction = Callable[[float], float]
OperatorFunction = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class LindbladTerm:
    """One decay channel: a jump operator with a (possibly negative) rate."""

    operator: np.ndarray
    rate: RateFunction

    def __post_init__(self) -> None:
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"Lindblad operator must be square, got {op.shape}")
        if not np.all(np.isfinite(op)):
            raise ValueError("Lindblad operator has non-finite entries")
        object.__setattr__(self, "operator", op)


@dataclass
class MasterEquationModel:
    """Immutable-by-convention bundle of H(t) and the Lindblad channels.

    ``hamiltonian`` may be None for H = 0.  Stacked operator arrays are
    precomputed once; rate functions are evaluated per time step.
    """

    dimension: int
    hamiltonian: OperatorFunction | None
    terms: Sequence[LindbladTerm]
    ops: np.ndarray = field(init=False, repr=False)
    ops_dag: np.ndarray = field(init=False, repr=False)
    ops_dag_ops: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        d = self.dimension
        if self.terms:
            self.ops = np.stack([t.operator for t in self.terms])
            if self.ops.shape[1:] != (d, d):
                raise ValueError("Lindblad operator shape inconsistent with model dimension")
        else:
            self.ops = np.zeros((0, d, d), dtype=complex)
        self.ops_dag = self.ops.conj().transpose(0, 2, 1)
        self.ops_dag_ops = np.einsum("aij,ajk->aik", self.ops_dag, self.ops)

    def rates(self, t: float) -> np.ndarray:
        return np.array([term.rate(t) for term in self.terms], dtype=float)

    def h(self, t: float) -> np.ndarray:
        if self.hamiltonian is None:
            return np.zeros((self.dimension, self.dimension), dtype=complex)
        return np.asarray(self.hamiltonian(t), dtype=complex)

    def gamma_matrix(self, t: float) -> np.ndarray:
        """Gamma(t) = sum_a g_a(t) L_a^dag L_a (Hermitian)."""
        d = self.dimension
        if not self.terms:
            return np.zeros((d, d), dtype=complex)
        return (self.rates(t) @ self.ops_dag_ops.reshape(len(self.terms), d * d)).reshape(d, d)


@dataclass(frozen=True)
class GaugeTransformation:
    """State-independent gauge operator C(t); arbitrary, not even normal."""

    c_operator: OperatorFunction

    def at(self, t: float) -> np.ndarray:
        return np.asarray(self.c_operator(t), dtype=complex)


def jump_apply(model: MasterEquationModel, t: float, rho: np.ndarray) -> np.ndarray:
    """Jump part J_t[rho] = sum_a g_a(t) L_a rho L_a^dag."""
    rho = np.asarray(rho, dtype=complex)
    if not model.terms:
        return np.zeros_like(rho)
    sandwich = np.einsum("aij,jk,akl->ail", model.ops, rho, model.ops_dag)
    return np.einsum("a,aij->ij", model.rates(t), sandwich)


def jump_image_state(model: MasterEquationModel, t: float, psi: np.ndarray) -> np.ndarray:
    """J_t[|psi><psi|] without forming the projector (trajectory hot path)."""
    d = model.dimension
    if not model.terms:
        return np.zeros((d, d), dtype=complex)
    vs = model.ops @ psi                       # (n, d) jump images L_a psi
    return (vs * model.rates(t)[:, None]).T @ vs.conj()


def effective_hamiltonian(model: MasterEquationModel, t: float) -> np.ndarray:
    """K(t) = H(t) - (i/2) Gamma(t)."""
    return model.h(t) - 0.5j * model.gamma_matrix(t)


def generator_apply(model: MasterEquationModel, t: float, rho: np.ndarray) -> np.ndarray:
    """Full generator: -i[H, rho] + J_t[rho] - {Gamma, rho}/2."""
    rho = np.asarray(rho, dtype=complex)
    h = model.h(t)
    gamma = model.gamma_matrix(t)
    out = -1j * (h @ rho - rho @ h)
    out += jump_apply(model, t, rho)
    out -= 0.5 * (gamma @ rho + rho @ gamma)
    return out


def driving_apply(model: MasterEquationModel, t: float, rho: np.ndarray) -> np.ndarray:
    """Driving part D_t[rho] = -i(K rho - rho K^dag)."""
    k = effective_hamiltonian(model, t)
    return -1j * (k @ rho - rho @ k.conj().T)


def gauge_transform(
    model: MasterEquationModel,
    gauge: GaugeTransformation,
    t: float,
    rho: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Transformed (J'[rho], K'(t)) for the gauge operator C(t).

    Reassembling J'[rho] - i(K' rho - rho K'^dag) recovers generator_apply for
    any C; the gauge-invariance property test pins that down.
    """
    rho = np.asarray(rho, dtype=complex)
    c = gauge.at(t)
    jprime = jump_apply(model, t, rho) + 0.5 * (c @ rho + rho @ c.conj().T)
    kprime = effective_hamiltonian(model, t) - 0.5j * c
    return jprime, kprime


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """Uniform grid 0, dt, ..., t_max (t_max rounded to a whole number of steps)."""
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    n = int(round(t_max / dt))
    if n < 1:
        raise StepSizeError(f"grid [0, {t_max}] holds no step of size {dt}")
    return np.arange(n + 1) * dt


def stability_limit(model: MasterEquationModel, grid: np.ndarray) -> float:
    """Largest admissible dt: 0.1 / max_t(||Gamma(t)|| + ||H(t)||), spectral norms."""
    worst = 0.0
    samples = grid[:: max(1, len(grid) // 64)]
    for t in samples:
        worst = max(
            worst,
            np.linalg.norm(model.gamma_matrix(t), 2) + np.linalg.norm(model.h(t), 2),
        )
    if worst == 0.0:
        return np.inf
    return 0.1 / worst


def exact_solve(
    model: MasterEquationModel,
    rho0: np.ndarray,
    grid: np.ndarray,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> np.ndarray:
    """Classical RK4 integration of the master equation on a fixed grid.

    Serves as the reference oracle for every unraveling: fixed step for
    bit-reproducible outputs, Hermiticity restored by symmetrization each
    step.  Raises StepSizeError past the stability guard.
    """
    rho0 = require_density_matrix(rho0, numeric)
    grid = np.asarray(grid, dtype=float)
    dt = float(grid[1] - grid[0])
    if not np.allclose(np.diff(grid), dt, rtol=0, atol=1e-9 * max(dt, 1.0)):
        raise StepSizeError("exact_solve requires a uniform time grid")
    limit = stability_limit(model, grid)
    if dt > limit:
        raise StepSizeError(f"dt={dt:g} exceeds stability bound {limit:g} for this model")

    out = np.empty((len(grid), model.dimension, model.dimension), dtype=complex)
    rho = rho0.astype(complex)
    out[0] = rho
    for i, t in enumerate(grid[:-1]):
        k1 = generator_apply(model, t, rho)
        k2 = generator_apply(model, t + 0.5 * dt, rho + 0.5 * dt * k1)
        k3 = generator_apply(model, t + 0.5 * dt, rho + 0.5 * dt * k2)
        k4 = generator_apply(model, t + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        out[i + 1] = rho
    return out


def validate_model(model: MasterEquationModel, grid: np.ndarray,
                   numeric: NumericPolicy = DEFAULT_NUMERIC) -> None:
    """Spot-check model invariants (H and Gamma Hermitian) on sampled times."""
    for t in grid[:: max(1, len(grid) // 16)]:
        require_hermitian(model.h(t), numeric)
        require_hermitian(model.gamma_matrix(t), numeric)
