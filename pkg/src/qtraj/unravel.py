"""Quantum-jump unraveling engines.

Four methods share one per-step protocol: evaluate the jump channels at the
left grid point, draw a single uniform, either jump to the selected target or
advance the deterministic flow, renormalize and re-fix the global phase.

* mcwf      - channels are the Lindblad operators themselves; requires all
              rates nonnegative.
* w_roqj    - jumps to the eigenstates of the projected jump image
              W = (1-P) J[P] (1-P); positive iff the dynamics is P-divisible.
* r_roqj    - jumps to the eigenstates of J'[P] for a state-independent gauge
              operator C(t).
* psi_roqj  - the general engine: the gauge may depend on the realization
              state through the vector Phi = C_psi psi, giving the rate
              operator R = J[P] + (|Phi><psi| + |psi><Phi|)/2 whose
              eigenvectors are the jump targets and eigenvalues (times dt)
              the jump probabilities.

The deterministic flow is the normalized solution of
d psi/dt = -i K(t) psi - Phi/2 (its first-order truncation is the familiar
(1 - iK dt)psi - dt/2 Phi update); a fourth-order integrator is the default
so that strongly driven models stay accurate at moderate dt.

Ensembles run trajectories with per-index RNG streams (base_seed XOR index)
in fixed-size blocks whose partial results are folded in index order, making
every statistic bit-identical for any worker count.  Policies that declare a
finite effective ensemble (deterministic track plus drift-free pole states)
run on a label chain instead of propagating state vectors, which is what
makes 10^4-trajectory runs take seconds.
"""

from __future__ import annotations

import multiprocessing
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (
    check_normalized,
    fix_gauge,
    hermitian_eigendecomposition,
    orthogonal_state_2d,
    projector,
    state_bloch,
)
from .errors import (
    NegativeRateError,
    PolicyError,
    PositivityViolation,
    ProbabilityOverflow,
    QtrajError,
)
from .master import (
    GaugeTransformation,
    MasterEquationModel,
    effective_hamiltonian,
    jump_image_state,
)
from .numeric import DEFAULT_NUMERIC, NumericPolicy

BLOCK_SIZE = 64  # trajectories per reduction block; fixed for reproducibility


@dataclass
class PolicyContext:
    """Per-trajectory knobs read by the transformation policies."""

    initial_theta: float = 0.0
    mixing_lambda: float = 0.5
    epsilon_shrink: float = 0.0
    theta_bar: float = 1.3
    xi_selector: float = 0.5
    has_jumped: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.mixing_lambda <= 1.0:
            raise ValueError("mixing_lambda must lie in [0, 1]")
        if not 0.0 <= self.xi_selector <= 1.0:
            raise ValueError("xi_selector must lie in [0, 1]")
        if self.epsilon_shrink < 0.0:
            raise ValueError("epsilon_shrink must be nonnegative")


@dataclass(frozen=True)
class PhiPolicy:
    """Realization-dependent transformation psi -> Phi_{psi,t}.

    kind is one of explicit_phi / c_operator / orthogonal_w_mode / builtin.
    Policies with a finite effective ensemble declare their drift-free pole
    states (the closed set of post-jump states); runners use them for the
    label-chain fast path and treat an initial state equal to a pole as
    already post-jump.
    """

    kind: str
    name: str
    evaluate: Callable[[np.ndarray, float, PolicyContext], np.ndarray]
    pole_states: tuple = ()
    pole_labels: tuple[str, ...] = ()

    @property
    def has_effective_ensemble(self) -> bool:
        return len(self.pole_states) >= 2


@dataclass
class RateOperatorResult:
    """Hermitian rate operator with its spectral data and effective generator."""

    r: np.ndarray
    eigenpairs: list[tuple[float, np.ndarray]]
    k_eff: np.ndarray
    trace_r: float


def build_rate_operator(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    policy: PhiPolicy,
    ctx: PolicyContext,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> RateOperatorResult:
    """R = J[P_psi] + (|Phi><psi| + |psi><Phi|)/2 with Phi from the policy."""
    psi = check_normalized(psi, numeric)
    phi = np.asarray(policy.evaluate(psi, t, ctx), dtype=complex)
    if phi.shape != psi.shape:
        raise PolicyError(f"policy returned shape {phi.shape}, expected {psi.shape}")
    if not np.all(np.isfinite(phi)):
        raise PolicyError("policy returned non-finite entries")
    r = jump_image_state(model, t, psi)
    r = r + 0.5 * (np.outer(phi, psi.conj()) + np.outer(psi, phi.conj()))
    eigenpairs = hermitian_eigendecomposition(r, numeric)
    k_eff = effective_hamiltonian(model, t) - 0.5j * np.outer(phi, psi.conj())
    return RateOperatorResult(r, eigenpairs, k_eff, float(np.trace(r).real))


def orthogonal_jump_phi(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    c11: complex,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> np.ndarray:
    """Phi making psi an eigenvector of R (orthogonal jumps, W-equivalent).

    Phi = c11 psi - 2 (1 - P) J[P] psi; the remaining eigenpairs of R then
    coincide with those of W restricted to the complement.  Re(c11) must not
    drop below -<psi|J[P]|psi> or the deterministic eigenvalue goes negative.
    """
    psi = check_normalized(psi, numeric)
    j_psi = jump_image_state(model, t, psi) @ psi
    expect = float(np.real(np.vdot(psi, j_psi)))
    if np.real(c11) < -expect - numeric.rate_clip:
        from .errors import ConstraintError

        raise ConstraintError(
            f"Re(c11)={np.real(c11):.6g} below the admissible floor {-expect:.6g}"
        )
    return c11 * psi - 2.0 * (j_psi - expect * psi)


def pole_phi(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> np.ndarray:
    """Post-jump transformation: zero self-rate, jumps only to the complement.

    The minimal admissible c11 = -<psi|J[P]|psi> in orthogonal_jump_phi; at
    the sigma_z poles of a phase covariant model this reduces to
    Phi = -gamma_z psi and leaves the pole drift-free.
    """
    psi = check_normalized(psi, numeric)
    j_psi = jump_image_state(model, t, psi) @ psi
    expect = float(np.real(np.vdot(psi, j_psi)))
    return -expect * psi - 2.0 * (j_psi - expect * psi)


# --------------------------------------------------------------------------
# deterministic flow
# --------------------------------------------------------------------------


def _drift_step(
    psi: np.ndarray,
    t: float,
    dt: float,
    rhs: Callable[[float, np.ndarray], np.ndarray],
    integrator: str,
    numeric: NumericPolicy,
) -> np.ndarray:
    """One step of the normalized deterministic flow; rhs is the raw velocity.

    rhs may assume a normalized input state: intermediate integrator stages
    are renormalized before evaluation, which makes the effective vector
    field constant along rays and tangent to the unit sphere.
    """
    if integrator == "euler":
        nxt = psi + dt * rhs(t, psi)
    else:

        def f(s: float, v: np.ndarray) -> np.ndarray:
            v = v / np.linalg.norm(v)
            u = rhs(s, v)
            return u - np.real(np.vdot(v, u)) * v  # norm-preserving projection

        k1 = f(t, psi)
        k2 = f(t + 0.5 * dt, psi + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, psi + 0.5 * dt * k2)
        k4 = f(t + dt, psi + dt * k3)
        nxt = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    nrm = np.linalg.norm(nxt)
    if nrm < 1e-12 or not np.isfinite(nrm):
        raise QtrajError(f"deterministic step collapsed the state at t={t:g}")
    return fix_gauge(nxt / nrm, numeric)


def _positive_probs(
    eigenpairs: list[tuple[float, np.ndarray]],
    dt: float,
    t: float,
    psi: np.ndarray,
    numeric: NumericPolicy,
    detail: str,
) -> list[float]:
    """Per-target probabilities with roundoff clipping and positivity guard."""
    probs = []
    for lam, _vec in eigenpairs:
        if lam < -numeric.rate_clip:
            raise PositivityViolation(t, psi, lam, detail)
        probs.append(max(lam, 0.0) * dt)
    total = sum(probs)
    if total > numeric.max_step_probability:
        raise ProbabilityOverflow(
            f"summed jump probability {total:.3g} at t={t:g} exceeds "
            f"{numeric.max_step_probability}; reduce dt"
        )
    return probs


def _pick(probs: Sequence[float], u: float) -> int | None:
    acc = 0.0
    for j, p in enumerate(probs):
        acc += p
        if u < acc:
            return j
    return None


@dataclass
class TrajectoryEvent:
    time: float
    kind: str  # "jump"
    index: int
    post_state: np.ndarray
    label: str | None = None


# --------------------------------------------------------------------------
# single steps
# --------------------------------------------------------------------------


def mcwf_step(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
) -> tuple[np.ndarray, TrajectoryEvent | None]:
    """Standard Monte Carlo wave function step; all rates must be nonnegative.

    The rate guard checks both step endpoints so models whose rates turn
    negative immediately after t = 0 abort on the very first step.
    """
    psi = check_normalized(psi, numeric)
    for t_chk in (t, t + dt):
        rates = model.rates(t_chk)
        if rates.size and rates.min() < -numeric.negative_rate_tol:
            raise NegativeRateError(t_chk, rates)
    rates = model.rates(t)
    targets = [model.ops[a] @ psi for a in range(len(rates))]
    probs = [rates[a] * float(np.vdot(v, v).real) * dt for a, v in enumerate(targets)]
    if sum(probs) > numeric.max_step_probability:
        raise ProbabilityOverflow(f"summed MCWF jump probability at t={t:g} too large")
    j = _pick(probs, rng.random())
    if j is not None:
        post = fix_gauge(targets[j] / np.linalg.norm(targets[j]), numeric)
        return post, TrajectoryEvent(t + dt, "jump", j, post)

    def rhs(s: float, v: np.ndarray) -> np.ndarray:
        return -1j * (effective_hamiltonian(model, s) @ v)

    return _drift_step(psi, t, dt, rhs, integrator, numeric), None


def _w_eigenpairs(
    model: MasterEquationModel, t: float, psi: np.ndarray, numeric: NumericPolicy
) -> list[tuple[float, np.ndarray]]:
    """Eigenpairs of W = (1-P) J[P] (1-P) restricted to the complement of psi."""
    j_image = jump_image_state(model, t, psi)
    if model.dimension == 2:
        perp = orthogonal_state_2d(psi)
        w = float(np.real(perp.conj() @ j_image @ perp))
        return [(w, perp)]
    d = model.dimension
    q, _ = np.linalg.qr(np.column_stack([psi, np.eye(d, dtype=complex)]))
    comp = q[:, 1:d]
    block = comp.conj().T @ j_image @ comp
    vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
    return [
        (float(vals[i]), fix_gauge(comp @ vecs[:, i], numeric))
        for i in reversed(range(d - 1))
    ]


def w_roqj_step(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
) -> tuple[np.ndarray, TrajectoryEvent | None]:
    """Orthogonal-jump step: targets are eigenstates of the projected jump image.

    Positive for every state iff the dynamics is P-divisible; the
    deterministic flow uses K + Delta with the nonlinear correction
    Delta = (i/2) sum_a g_a (2 ell_a^* L_a - |ell_a|^2), ell_a = <psi|L_a|psi>.
    """
    psi = check_normalized(psi, numeric)
    pairs = _w_eigenpairs(model, t, psi, numeric)
    probs = _positive_probs(pairs, dt, t, psi, numeric, "W eigenvalue")
    j = _pick(probs, rng.random())
    if j is not None:
        post = pairs[j][1]
        return post, TrajectoryEvent(t + dt, "jump", j, post)

    def rhs(s: float, v: np.ndarray) -> np.ndarray:
        rates = model.rates(s)
        ells = np.einsum("i,aij,j->a", v.conj(), model.ops, v)
        delta = 0.5j * (
            2.0 * np.einsum("a,aij->ij", rates * ells.conj(), model.ops)
            - np.dot(rates, np.abs(ells) ** 2) * np.eye(model.dimension)
        )
        return -1j * ((effective_hamiltonian(model, s) + delta) @ v)

    return _drift_step(psi, t, dt, rhs, integrator, numeric), None


def psi_roqj_step(
    model: MasterEquationModel,
    policy: PhiPolicy,
    ctx: PolicyContext,
    t: float,
    psi: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
) -> tuple[np.ndarray, TrajectoryEvent | None, PolicyContext]:
    """Generalized rate-operator step with a realization-dependent gauge."""
    ro = build_rate_operator(model, t, psi, policy, ctx, numeric)
    probs = _positive_probs(ro.eigenpairs, dt, t, psi, numeric, f"policy {policy.name}")
    j = _pick(probs, rng.random())
    if j is not None:
        post = ro.eigenpairs[j][1]
        # snap to the declared pole: near rate crossings the numerical
        # eigenvectors of R mix the (analytically exact) pole targets
        pole = matching_pole(policy, post, numeric)
        label = None
        if pole is not None:
            post = policy.pole_states[pole]
            label = policy.pole_labels[pole] if policy.pole_labels else None
        return post, TrajectoryEvent(t + dt, "jump", j, post, label), replace(ctx, has_jumped=True)

    def rhs(s: float, v: np.ndarray) -> np.ndarray:
        phi = np.asarray(policy.evaluate(v, s, ctx), dtype=complex)
        return -1j * (effective_hamiltonian(model, s) @ v) - 0.5 * phi

    return _drift_step(psi, t, dt, rhs, integrator, numeric), None, ctx


def r_roqj_step(
    model: MasterEquationModel,
    gauge: GaugeTransformation,
    t: float,
    psi: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
) -> tuple[np.ndarray, TrajectoryEvent | None]:
    """Rate-operator step with a state-independent gauge operator C(t)."""
    psi = check_normalized(psi, numeric)
    c = gauge.at(t)
    r = jump_image_state(model, t, psi)
    p = projector(psi, numeric)
    r = r + 0.5 * (c @ p + p @ c.conj().T)
    pairs = hermitian_eigendecomposition(0.5 * (r + r.conj().T), numeric)
    probs = _positive_probs(pairs, dt, t, psi, numeric, "R eigenvalue")
    j = _pick(probs, rng.random())
    if j is not None:
        post = pairs[j][1]
        return post, TrajectoryEvent(t + dt, "jump", j, post)

    def rhs(s: float, v: np.ndarray) -> np.ndarray:
        kprime = effective_hamiltonian(model, s) - 0.5j * gauge.at(s)
        return -1j * (kprime @ v)

    return _drift_step(psi, t, dt, rhs, integrator, numeric), None


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """One realization: the seed, its jump events and states on the output grid.

    Deterministic segments are implicit between consecutive events.
    """

    seed: int
    events: list[TrajectoryEvent]
    sampled_times: np.ndarray
    sampled_states: np.ndarray
    sampled_labels: list[str] | None = None


def matching_pole(
    policy: PhiPolicy, psi: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC
) -> int | None:
    """Index of the policy pole state that psi coincides with (up to phase)."""
    for i, pole in enumerate(policy.pole_states):
        if abs(np.vdot(pole, psi)) >= 1.0 - numeric.pole_tol:
            return i
    return None


def run_trajectory(
    model: MasterEquationModel,
    method: str,
    policy: PhiPolicy | None,
    ctx: PolicyContext | None,
    psi0: np.ndarray,
    grid: np.ndarray,
    seed: int,
    output_stride: int = 1,
    gauge: GaugeTransformation | None = None,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
) -> TrajectoryRecord:
    """Simulate one realization; a deterministic function of all arguments."""
    rng = np.random.default_rng(np.uint64(seed))
    dt = float(grid[1] - grid[0])
    psi = fix_gauge(check_normalized(psi0, numeric), numeric)
    ctx = replace(ctx) if ctx is not None else PolicyContext()
    if policy is not None and matching_pole(policy, psi, numeric) is not None:
        ctx = replace(ctx, has_jumped=True)

    sample_idx = np.arange(0, len(grid), output_stride)
    if sample_idx[-1] != len(grid) - 1:
        sample_idx = np.append(sample_idx, len(grid) - 1)
    sampled = np.empty((len(sample_idx), model.dimension), dtype=complex)
    events: list[TrajectoryEvent] = []
    out_pos = 0
    for k, t in enumerate(grid[:-1]):
        if out_pos < len(sample_idx) and sample_idx[out_pos] == k:
            sampled[out_pos] = psi
            out_pos += 1
        if method == "mcwf":
            psi, event = mcwf_step(model, t, psi, dt, rng, numeric, integrator)
        elif method == "w_roqj":
            psi, event = w_roqj_step(model, t, psi, dt, rng, numeric, integrator)
        elif method == "r_roqj":
            if gauge is None:
                raise QtrajError("r_roqj requires a gauge transformation")
            psi, event = r_roqj_step(model, gauge, t, psi, dt, rng, numeric, integrator)
        elif method == "psi_roqj":
            if policy is None:
                raise QtrajError("psi_roqj requires a policy")
            psi, event, ctx = psi_roqj_step(
                model, policy, ctx, t, psi, dt, rng, numeric, integrator
            )
        else:
            raise QtrajError(f"unknown method '{method}'")
        if event is not None:
            events.append(event)
    sampled[out_pos:] = psi
    return TrajectoryRecord(seed, events, grid[sample_idx], sampled)


def waiting_time_jump_sampler(
    model: MasterEquationModel,
    policy: PhiPolicy,
    ctx: PolicyContext,
    psi: np.ndarray,
    t0: float,
    rng: np.random.Generator,
    horizon: float,
    dt: float,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
) -> float | None:
    """Next jump time via norm decay of the deterministic state, or None.

    Integrates the survival exponent int tr R dt along the no-jump flow and
    returns the first grid time where the survival probability crosses a
    single uniform draw; equivalent to per-step Bernoulli sampling as dt -> 0.
    Rate positivity is checked lazily along the way.
    """
    target = -np.log(rng.random())
    accum = 0.0
    t = t0
    state = fix_gauge(check_normalized(psi, numeric), numeric)
    n = int(round((horizon - t0) / dt))
    for _ in range(n):
        ro = build_rate_operator(model, t, state, policy, ctx, numeric)
        for lam, _ in ro.eigenpairs:
            if lam < -numeric.rate_clip:
                raise PositivityViolation(t, state, lam, f"policy {policy.name}")
        accum += max(ro.trace_r, 0.0) * dt
        if accum >= target:
            return t + dt

        def rhs(s: float, v: np.ndarray) -> np.ndarray:
            phi = np.asarray(policy.evaluate(v, s, ctx), dtype=complex)
            return -1j * (effective_hamiltonian(model, s) @ v) - 0.5 * phi

        state = _drift_step(state, t, dt, rhs, integrator, numeric)
        t += dt
    return None


# --------------------------------------------------------------------------
# ensembles
# --------------------------------------------------------------------------


@dataclass
class EnsembleResult:
    """Grid-sampled ensemble statistics of one unraveling run."""

    grid: np.ndarray
    rho_estimate: np.ndarray                     # (T, d, d)
    bloch: np.ndarray                            # (T, 3)
    stderr: np.ndarray                           # (T, 3)
    occupations: dict[str, np.ndarray] | None    # label -> (T,)
    entropy: np.ndarray | None                   # (T,)
    cumulative_jumps: np.ndarray                 # (T,) ensemble totals up to t
    jump_count_total: int
    wall_time: float
    n_traj: int
    realizations: list[TrajectoryRecord] = field(default_factory=list)
    det_states: np.ndarray | None = None         # (T, d) deterministic track, label engine only


@dataclass
class _LabelTrack:
    """Precomputed deterministic track and label-chain rates.

    det_probs rows hold per-step jump probabilities in eigenvalue-descending
    order (the same categorical order the per-step engine uses) with
    det_targets giving the pole index of each slot.
    """

    det_states: np.ndarray      # (n+1, d) gauge-fixed deterministic states
    det_probs: np.ndarray       # (n, L) category probabilities, eigen order
    det_cumprobs: np.ndarray    # (n, L) running sums of det_probs rows
    det_targets: np.ndarray     # (n, L) pole index per category (-1 padding)
    pole_probs: np.ndarray      # (n, L) per-step probability pole -> partner
    pole_partner: np.ndarray    # (L,) index of the jump target of each pole
    labels: list[str]


def _prepare_label_track(
    model: MasterEquationModel,
    policy: PhiPolicy,
    ctx: PolicyContext,
    psi0: np.ndarray,
    grid: np.ndarray,
    numeric: NumericPolicy,
    integrator: str,
) -> _LabelTrack | None:
    """Build the effective-ensemble track, or None when it does not apply.

    The rate operator is projected onto the declared pole basis instead of
    being diagonalized: the pole policies construct R diagonal there, the
    projection stays exact when the two rates cross (where an
    eigendecomposition mixes the degenerate eigenvectors arbitrarily), and a
    non-negligible off-diagonal block means the policy does not actually fit
    the declared ensemble, triggering the generic-engine fallback.

    Raises PositivityViolation if any jump rate along the deterministic track
    or at a pole is negative: together those states cover everything a
    trajectory can visit, so the positivity verdict is deterministic.
    """
    poles = [check_normalized(p, numeric) for p in policy.pole_states]
    n_poles = len(poles)
    if n_poles != 2 or model.dimension != 2:
        return None  # the pole projection is complete only for qubit pairs
    dt = float(grid[1] - grid[0])
    n = len(grid) - 1
    d = model.dimension
    det_states = np.empty((n + 1, d), dtype=complex)
    det_probs = np.zeros((n, n_poles))
    det_targets = np.full((n, n_poles), -1, dtype=np.int64)
    pole_probs = np.zeros((n, n_poles))
    pole_partner = np.array([1, 0], dtype=np.int64)

    post_ctx = replace(ctx, has_jumped=True)
    psi = fix_gauge(check_normalized(psi0, numeric), numeric)
    det_states[0] = psi
    start_pole = matching_pole(policy, psi, numeric)
    pole_mat = np.stack(poles)  # (2, d)

    def drift_rhs(pol_ctx):
        def rhs(s: float, v: np.ndarray) -> np.ndarray:
            phi = np.asarray(policy.evaluate(v, s, pol_ctx), dtype=complex)
            return -1j * (effective_hamiltonian(model, s) @ v) - 0.5 * phi

        return rhs

    def pole_basis_rates(state, t, pol_ctx, detail):
        """Diagonal of R in the pole basis; None if R leaves that basis."""
        ro = build_rate_operator(model, t, state, policy, pol_ctx, numeric)
        block = pole_mat.conj() @ ro.r @ pole_mat.T
        scale = max(1.0, float(np.abs(block).max()))
        if abs(block[0, 1]) > 1e-9 * scale:
            return None
        mu = block.diagonal().real
        if mu.min() < -numeric.rate_clip:
            raise PositivityViolation(t, state, float(mu.min()), detail)
        return np.maximum(mu, 0.0)

    for k, t in enumerate(grid[:-1]):
        if start_pole is None:
            mu = pole_basis_rates(psi, t, ctx, f"policy {policy.name}")
            if mu is None:
                return None
            # categorical order matches the per-step engine: descending rate,
            # ties broken by pole index
            order = np.argsort(-mu, kind="stable")
            det_probs[k] = mu[order] * dt
            det_targets[k] = order
            if det_probs[k].sum() > numeric.max_step_probability:
                raise ProbabilityOverflow(f"label-chain jump probability too large at t={t:g}")
            psi = _drift_step(psi, t, dt, drift_rhs(ctx), integrator, numeric)
        else:
            psi = poles[start_pole]
        det_states[k + 1] = psi

        for i, pole in enumerate(poles):
            mu = pole_basis_rates(pole, t, post_ctx, f"pole {policy.pole_labels[i]}")
            if mu is None:
                return None
            if mu[i] * dt > 1e-12:
                return None  # nonzero self-rate: chain bookkeeping undefined
            pole_probs[k, i] = mu[1 - i] * dt
        # poles must be drift-free or the chain bookkeeping is wrong
        for pole in poles:
            vel = drift_rhs(post_ctx)(t, pole)
            residual = vel - np.vdot(pole, vel) * pole
            if np.linalg.norm(residual) > 1e-8 * (1.0 + np.linalg.norm(vel)):
                return None
    return _LabelTrack(
        det_states, det_probs, np.cumsum(det_probs, axis=1), det_targets,
        pole_probs, pole_partner, list(policy.pole_labels),
    )


def _label_chain_trajectory(
    track: _LabelTrack,
    start_state: int,
    n_steps: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """(jump_step_indices, state_timeline) for one label-chain realization.

    state code -1 = deterministic track, 0..L-1 = pole index.  A jump during
    step k takes effect at grid index k+1.  Exactly one uniform per step is
    consumed, in step order, matching the per-step engines.
    """
    u = rng.random(n_steps)
    jumps: list[int] = []
    states: list[int] = [start_state]
    state = start_state
    k = 0
    while k < n_steps:
        if state == -1:
            totals = track.det_cumprobs[k:, -1]
            hit = u[k:] < totals
            if not hit.any():
                break
            j = int(np.argmax(hit))
            step = k + j
            slot = int(np.searchsorted(track.det_cumprobs[step], u[step], side="right"))
            slot = min(slot, track.det_probs.shape[1] - 1)
            state = int(track.det_targets[step, slot])
        else:
            hit = u[k:] < track.pole_probs[k:, state]
            if not hit.any():
                break
            j = int(np.argmax(hit))
            step = k + j
            state = int(track.pole_partner[state])
        jumps.append(step)
        states.append(state)
        k = step + 1
    return np.asarray(jumps, dtype=np.int64), np.asarray(states, dtype=np.int64)


# Worker context shared via fork; holds closures that are not picklable.
_JOB: dict = {}


def _set_job(payload: dict) -> None:
    _JOB.clear()
    _JOB.update(payload)


def _run_block_label(block: int) -> tuple:
    job = _JOB
    track: _LabelTrack = job["track"]
    sample_idx: np.ndarray = job["sample_idx"]
    n_steps: int = job["n_steps"]
    lo = block * BLOCK_SIZE
    hi = min(lo + BLOCK_SIZE, job["n_traj"])
    n_labels = len(track.labels)
    occ = np.zeros((len(sample_idx), n_labels + 1), dtype=np.int64)
    cum_jumps = np.zeros(len(sample_idx), dtype=np.int64)
    total_jumps = 0
    for i in range(lo, hi):
        rng = np.random.default_rng(np.uint64(job["base_seed"] ^ i))
        jumps, states = _label_chain_trajectory(track, job["start_state"], n_steps, rng)
        pos = np.searchsorted(jumps, sample_idx, side="left")
        state_at = states[pos]
        occ[np.arange(len(sample_idx)), state_at + 1] += 1
        cum_jumps += pos
        total_jumps += len(jumps)
    return occ, cum_jumps, total_jumps


def _run_block_generic(block: int) -> tuple:
    job = _JOB
    lo = block * BLOCK_SIZE
    hi = min(lo + BLOCK_SIZE, job["n_traj"])
    sample_idx = job["sample_idx"]
    t_out = len(sample_idx)
    sum_bloch = np.zeros((t_out, 3))
    sum_bloch2 = np.zeros((t_out, 3))
    sum_proj = np.zeros((t_out, job["dim"], job["dim"]), dtype=complex)
    cum_jumps = np.zeros(t_out, dtype=np.int64)
    total_jumps = 0
    for i in range(lo, hi):
        rec = run_trajectory(
            job["model"], job["method"], job["policy"], job["ctx"],
            job["psi0"], job["grid"], job["base_seed"] ^ i,
            output_stride=job["output_stride"], gauge=job["gauge"],
            numeric=job["numeric"], integrator=job["integrator"],
        )
        b = np.stack([state_bloch(s) for s in rec.sampled_states])
        sum_bloch += b
        sum_bloch2 += b * b
        sum_proj += np.einsum("ti,tj->tij", rec.sampled_states, rec.sampled_states.conj())
        ev_times = np.array([e.time for e in rec.events])
        cum_jumps += np.searchsorted(ev_times, rec.sampled_times, side="right")
        total_jumps += len(rec.events)
    return sum_bloch, sum_bloch2, sum_proj, cum_jumps, total_jumps


def _map_blocks(fn, blocks: list[int], workers: int):
    if workers <= 1 or len(blocks) <= 1:
        return [fn(b) for b in blocks]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        return [fn(b) for b in blocks]
    with ctx.Pool(min(workers, len(blocks))) as pool:
        return pool.map(fn, blocks)


def run_ensemble(
    model: MasterEquationModel,
    method: str,
    policy: PhiPolicy | None,
    psi0: np.ndarray,
    grid: np.ndarray,
    n_traj: int,
    base_seed: int,
    worker_count: int = 1,
    ctx: PolicyContext | None = None,
    output_stride: int = 1,
    gauge: GaugeTransformation | None = None,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
    integrator: str = "rk4",
    engine: str = "auto",
    realization_count: int = 0,
) -> EnsembleResult:
    """Average n_traj independent realizations on the output grid.

    Per-trajectory seeds are base_seed XOR index; statistics are reduced in
    fixed-size blocks in index order, so the result is bit-identical for any
    worker_count.  engine = auto|label|generic: "label" runs the
    effective-ensemble chain (requires a policy with declared poles),
    "generic" propagates state vectors; "auto" prefers the label chain for
    psi_roqj policies that declare one and falls back otherwise.
    """
    if n_traj < 1:
        raise QtrajError("n_traj must be >= 1")
    t_start = _time.perf_counter()
    grid = np.asarray(grid, dtype=float)
    ctx = ctx if ctx is not None else PolicyContext()
    psi0 = fix_gauge(check_normalized(psi0, numeric), numeric)
    sample_idx = np.arange(0, len(grid), output_stride)
    if sample_idx[-1] != len(grid) - 1:
        sample_idx = np.append(sample_idx, len(grid) - 1)
    n_steps = len(grid) - 1

    track = None
    if method == "psi_roqj" and policy is not None and engine in ("auto", "label"):
        if policy.has_effective_ensemble:
            track = _prepare_label_track(
                model, policy, ctx, psi0, grid, numeric, integrator
            )
        if track is None and engine == "label":
            raise QtrajError("label engine requested but the policy declares no usable ensemble")

    blocks = list(range((n_traj + BLOCK_SIZE - 1) // BLOCK_SIZE))

    if track is not None:
        start_pole = matching_pole(policy, psi0, numeric)
        start_state = -1 if start_pole is None else start_pole
        _set_job(
            dict(track=track, sample_idx=sample_idx, n_steps=n_steps,
                 n_traj=n_traj, base_seed=int(base_seed), start_state=start_state)
        )
        parts = _map_blocks(_run_block_label, blocks, worker_count)
        occ = sum(p[0] for p in parts)
        cum_jumps = sum(p[1] for p in parts)
        total_jumps = sum(p[2] for p in parts)

        det_sampled = track.det_states[sample_idx]
        det_bloch = np.stack([state_bloch(s) for s in det_sampled])
        pole_bloch = np.stack([state_bloch(p) for p in policy.pole_states])
        label_bloch = np.concatenate([det_bloch[:, None, :],
                                      np.broadcast_to(pole_bloch, (len(sample_idx),) + pole_bloch.shape)],
                                     axis=1)
        counts = occ.astype(float)                       # (T, L+1), det first
        sum_b = np.einsum("tl,tlc->tc", counts, label_bloch)
        sum_b2 = np.einsum("tl,tlc->tc", counts, label_bloch**2)
        mean = sum_b / n_traj
        var = np.maximum(sum_b2 - sum_b**2 / n_traj, 0.0) / max(n_traj - 1, 1)
        stderr = np.sqrt(var / n_traj)

        det_proj = np.einsum("ti,tj->tij", det_sampled, det_sampled.conj())
        pole_proj = np.stack([np.outer(p, p.conj()) for p in policy.pole_states])
        rho = (counts[:, 0, None, None] * det_proj +
               np.einsum("tl,lij->tij", counts[:, 1:], pole_proj)) / n_traj

        p = counts / n_traj
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.sum(np.where(p > 0, p * np.log2(p), 0.0), axis=1) + 0.0
        labels = ["p_det"] + [f"p_{name}" for name in track.labels]
        occupations = {lab: p[:, i] for i, lab in enumerate(labels)}
        det_sampled_out = det_sampled
    else:
        _set_job(
            dict(model=model, method=method, policy=policy, ctx=ctx, psi0=psi0,
                 grid=grid, base_seed=int(base_seed), n_traj=n_traj,
                 output_stride=output_stride, gauge=gauge, numeric=numeric,
                 integrator=integrator, sample_idx=sample_idx, dim=model.dimension)
        )
        parts = _map_blocks(_run_block_generic, blocks, worker_count)
        sum_b = sum(p[0] for p in parts)
        sum_b2 = sum(p[1] for p in parts)
        sum_proj = sum(p[2] for p in parts)
        cum_jumps = sum(p[3] for p in parts)
        total_jumps = sum(p[4] for p in parts)
        mean = sum_b / n_traj
        var = np.maximum(sum_b2 - sum_b**2 / n_traj, 0.0) / max(n_traj - 1, 1)
        stderr = np.sqrt(var / n_traj)
        rho = sum_proj / n_traj
        occupations = None
        ent = None
        det_sampled_out = None

    realizations = [
        run_trajectory(model, method, policy, ctx, psi0, grid, base_seed ^ i,
                       output_stride=output_stride, gauge=gauge, numeric=numeric,
                       integrator=integrator)
        for i in range(min(realization_count, n_traj))
    ]
    wall = _time.perf_counter() - t_start
    return EnsembleResult(
        grid=grid[sample_idx],
        rho_estimate=rho,
        bloch=mean,
        stderr=stderr,
        occupations=occupations,
        entropy=ent,
        cumulative_jumps=np.asarray(cum_jumps, dtype=np.int64),
        jump_count_total=int(total_jumps),
        wall_time=wall,
        n_traj=n_traj,
        realizations=realizations,
        det_states=det_sampled_out,
    )
