"""Model and transformation-policy zoo for qubit dynamics.

Contains the concrete rate families used by the desk-scale experiments
(eternally non-Markovian, oscillating dephasing, negative pumping, driven),
the closed-form admissibility bounds of the pole-jump and plus/minus jump
transformations, the policies themselves, and the kappa-theta positivity
scan.  Rate functions are small frozen dataclasses so models stay picklable.

Conventions: sigma_plus = |1><0|, sigma_z|0> = +|0>, states written
psi = alpha|0> + sqrt(1-alpha^2)|1> with alpha real in the phase covariant
gauge.  Positivity of the pole-jump construction is exactly

    phi_1 in [lb, ub],  lb = -alpha^2 g_+ / beta - g_z beta,
                        ub = beta^3 g_- / alpha^2 + 3 beta g_z,

with beta = sqrt(1-alpha^2); phi_1 = lb suppresses jumps to |1> (only |0>
jumps remain) and phi_1 = ub suppresses jumps to |0>.  The inward-shifted
interval [lb + 2 eps, ub - 2 eps] trades margin for robustness and collapses
exactly when sqrt(g_-/g_+) = beta^2/alpha^2 at g_z = -sqrt(g_+ g_-)/2.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    KET_MINUS,
    KET_PLUS,
    KET_0,
    KET_1,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    check_normalized,
)
from .errors import (
    ConfigError,
    DegenerateAmplitude,
    GaugeError,
    PoleState,
    PolicyError,
)
from .master import LindbladTerm, MasterEquationModel
from .numeric import DEFAULT_NUMERIC, NumericPolicy
from .unravel import PhiPolicy, PolicyContext

# --------------------------------------------------------------------------
# rate functions (picklable callables)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantRate:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class ExpRate:
    """coefficient * exp(-decay * t)."""

    coefficient: float
    decay: float

    def __call__(self, t: float) -> float:
        return self.coefficient * np.exp(-self.decay * t)


@dataclass(frozen=True)
class OscillatingExpRate:
    """amplitude * exp(-decay * t) * cos(frequency * t)."""

    amplitude: float
    decay: float
    frequency: float

    def __call__(self, t: float) -> float:
        return self.amplitude * np.exp(-self.decay * t) * np.cos(self.frequency * t)


@dataclass(frozen=True)
class NegHalfTanhRate:
    """-(scale/2) * tanh(scale * t); the eternally negative dephasing rate."""

    scale: float = 1.0

    def __call__(self, t: float) -> float:
        return -0.5 * self.scale * np.tanh(self.scale * t)


@dataclass(frozen=True)
class SumRate:
    parts: tuple

    def __call__(self, t: float) -> float:
        return sum(p(t) for p in self.parts)


@dataclass(frozen=True)
class TabulatedRate:
    """Linear interpolation through sampled (t, value) pairs; clamped ends."""

    times: tuple
    values: tuple

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class ScaledOperator:
    """coefficient(t) * operator, for time-dependent Hamiltonians."""

    operator: np.ndarray
    coefficient: Callable[[float], float]

    def __call__(self, t: float) -> np.ndarray:
        return self.coefficient(t) * self.operator


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseCovariantRates:
    gamma_plus: Callable[[float], float]
    gamma_minus: Callable[[float], float]
    gamma_z: Callable[[float], float]

    def at(self, t: float) -> tuple[float, float, float]:
        return self.gamma_plus(t), self.gamma_minus(t), self.gamma_z(t)


def phase_covariant_model(
    rates: PhaseCovariantRates,
    h_z_coefficient: Callable[[float], float] | None = None,
) -> MasterEquationModel:
    """Qubit model with channels (sigma_plus, g+), (sigma_minus, g-), (sigma_z, g_z)."""
    ham = ScaledOperator(SIGMA_Z, h_z_coefficient) if h_z_coefficient is not None else None
    return MasterEquationModel(
        dimension=2,
        hamiltonian=ham,
        terms=[
            LindbladTerm(SIGMA_PLUS, rates.gamma_plus),
            LindbladTerm(SIGMA_MINUS, rates.gamma_minus),
            LindbladTerm(SIGMA_Z, rates.gamma_z),
        ],
    )


def enm_rates() -> PhaseCovariantRates:
    """Eternally non-Markovian family: g+ = g- = 1, g_z = -tanh(t)/2."""
    return PhaseCovariantRates(ConstantRate(1.0), ConstantRate(1.0), NegHalfTanhRate(1.0))


def enm_model() -> MasterEquationModel:
    return phase_covariant_model(enm_rates())


def oscillating_dephasing_rates(kappa: float) -> PhaseCovariantRates:
    """g+ = e^{-t/2}, g- = e^{-t/4}, g_z = (kappa/2) e^{-3t/8} cos 2t.

    P-divisible for kappa <= 1; the dephasing rate dips below the threshold
    -sqrt(g+ g-)/2 in periodic windows once kappa > 1.
    """
    return PhaseCovariantRates(
        ExpRate(1.0, 0.5),
        ExpRate(1.0, 0.25),
        OscillatingExpRate(0.5 * kappa, 0.375, 2.0),
    )


def negative_pumping_rates(kappa: float) -> PhaseCovariantRates:
    """g+ = g- = (e^{-t/4}/2)[kappa + (1-kappa) e^{-t/4} cos 2t], g_z = 1/2.

    The common pumping rate turns negative in windows for small kappa, which
    expels the sigma_z poles from the positivity domain.
    """
    gamma = SumRate(
        (
            ExpRate(0.5 * kappa, 0.25),
            OscillatingExpRate(0.5 * (1.0 - kappa), 0.5, 2.0),
        )
    )
    return PhaseCovariantRates(gamma, gamma, ConstantRate(0.5))


def driven_rates(gamma: float) -> PhaseCovariantRates:
    """g+ = g- = gamma, g_z = -(gamma/2) tanh(gamma t)."""
    return PhaseCovariantRates(
        ConstantRate(gamma), ConstantRate(gamma), NegHalfTanhRate(gamma)
    )


def driven_model(gamma: float, beta: float) -> MasterEquationModel:
    """Damped qubit with a transverse drive H = beta sigma_x.

    beta = 0 reduces to the (rescaled) eternally non-Markovian model; any
    nonzero beta breaks phase covariance.
    """
    if gamma <= 0:
        raise ConfigError("driven model requires gamma > 0")
    rates = driven_rates(gamma)
    return MasterEquationModel(
        dimension=2,
        hamiltonian=ScaledOperator(SIGMA_X, ConstantRate(beta)),
        terms=[
            LindbladTerm(SIGMA_PLUS, rates.gamma_plus),
            LindbladTerm(SIGMA_MINUS, rates.gamma_minus),
            LindbladTerm(SIGMA_Z, rates.gamma_z),
        ],
    )


def pure_dephasing_model(gamma: Callable[[float], float] | float) -> MasterEquationModel:
    """d rho/dt = gamma(t) (sigma_z rho sigma_z - rho)."""
    rate = ConstantRate(float(gamma)) if isinstance(gamma, (int, float)) else gamma
    return MasterEquationModel(
        dimension=2, hamiltonian=None, terms=[LindbladTerm(SIGMA_Z, rate)]
    )


# --------------------------------------------------------------------------
# admissibility bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiBounds:
    """Exact positivity interval of phi_1 and its inward-shifted version."""

    lb: float
    ub: float
    shrunk_lb: float
    shrunk_ub: float

    @property
    def valid(self) -> bool:
        return self.shrunk_ub >= self.shrunk_lb


def phi_bounds_ph_cov(
    alpha: float,
    gamma_plus: float,
    gamma_minus: float,
    gamma_z: float,
    eps: float = 0.0,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> PhiBounds:
    """Positivity interval of phi_1 at the current rates.

    Both rate-operator eigenvalues are nonnegative iff phi_1 in [lb, ub];
    diverges at the poles alpha in {0, 1}, which are handled by the
    dedicated post-jump transformation instead.
    """
    if alpha < numeric.pole_tol or alpha > 1.0 - numeric.pole_tol:
        raise PoleState(f"phi_1 bounds diverge at alpha={alpha}")
    beta = np.sqrt(1.0 - alpha * alpha)
    lb = -alpha * alpha * gamma_plus / beta - gamma_z * beta
    ub = beta**3 * gamma_minus / (alpha * alpha) + 3.0 * beta * gamma_z
    return PhiBounds(lb, ub, lb + 2.0 * eps, ub - 2.0 * eps)


def p_div_violation(gamma_plus: float, gamma_minus: float, gamma_z: float) -> float:
    """eps >= 0 with g_z = -sqrt(g+ g-)/2 - eps; zero while P-divisible."""
    if gamma_plus < 0 or gamma_minus < 0:
        return np.inf
    return max(0.0, -gamma_z - 0.5 * np.sqrt(gamma_plus * gamma_minus))


@dataclass(frozen=True)
class XiBounds:
    lb: float
    ub: float

    @property
    def valid(self) -> bool:
        return self.ub >= self.lb


def xi_bounds(
    alpha: complex,
    gamma: float,
    gamma_z: float,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> XiBounds:
    """Admissible interval of xi = 2 Re(phi_- alpha*) for plus/minus jumps.

    psi = alpha|-> + sqrt(1-|alpha|^2)|+> with complex alpha; both jump rates
    are nonnegative iff xi in [lb, ub].  Reduces to the printed gamma = 1
    expressions; validated against brute-force diagonalization.
    """
    a2 = abs(alpha) ** 2
    b2 = 1.0 - a2
    if b2 < numeric.pole_tol:
        raise DegenerateAmplitude("xi bounds diverge as |alpha| -> 1")
    lb = -gamma - 2.0 * gamma_z * b2
    ub = (gamma * a2 * (3.0 - 2.0 * a2) + 2.0 * gamma_z * a2 * a2) / b2
    ub += (gamma - 2.0 * gamma_z) * 2.0 * np.real(alpha * alpha)
    return XiBounds(lb, ub)


def ph_cov_phi_vector(alpha: float, gamma_z: float, phi1: float) -> np.ndarray:
    """Phi = alpha (2 g_z - phi1/beta) |0> + phi1 |1> for real-gauge states."""
    beta = np.sqrt(1.0 - alpha * alpha)
    return np.array([alpha * (2.0 * gamma_z - phi1 / beta), phi1], dtype=complex)


# --------------------------------------------------------------------------
# gauge helpers shared by the policies
# --------------------------------------------------------------------------


def _real_gauge_01(psi: np.ndarray, numeric: NumericPolicy) -> tuple[float, float, complex]:
    """(alpha, beta, phase) with e^{-i phase-arg} psi = alpha|0> + beta|1>, both real.

    Raises GaugeError if the state cannot be brought to real amplitudes, i.e.
    phase covariance was broken.
    """
    psi = psi / np.linalg.norm(psi)
    a0, a1 = psi[0], psi[1]
    anchor = a0 if abs(a0) >= abs(a1) else a1
    phase = anchor / abs(anchor)
    tilde = psi * np.conj(phase)
    if max(abs(tilde[0].imag), abs(tilde[1].imag)) > numeric.gauge_tol:
        raise GaugeError("state amplitudes are not relatively real (gauge broken)")
    alpha, beta = tilde[0].real, tilde[1].real
    if beta < 0:  # fold the sign into |1>'s amplitude convention
        alpha, beta, phase = -alpha, -beta, -phase
    return float(alpha), float(beta), phase


def _pm_components(psi: np.ndarray) -> tuple[complex, float, complex]:
    """(alpha_minus, beta_plus, phase) with e^{-i arg} psi = alpha|-> + beta|+>, beta real >= 0.

    The global phase is anchored on the |+> component so beta comes out real
    and nonnegative; at beta ~ 0 the caller is near the |-> pole and handles
    it separately.
    """
    psi = psi / np.linalg.norm(psi)
    c_plus = complex(np.vdot(KET_PLUS, psi))
    c_minus = complex(np.vdot(KET_MINUS, psi))
    anchor = c_plus if abs(c_plus) > 1e-14 else c_minus
    phase = anchor / abs(anchor)
    c_plus *= np.conj(phase)
    c_minus *= np.conj(phase)
    return c_minus, float(c_plus.real), phase


def _require_equal_pumping(gp: float, gm: float) -> float:
    if abs(gp - gm) > 1e-10 * max(1.0, abs(gp), abs(gm)):
        raise PolicyError("plus/minus policies require gamma_plus = gamma_minus")
    return gp


# --------------------------------------------------------------------------
# policies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PoleJumpPhi:
    """Jumps to the sigma_z eigenstates; phi_1 mixes the shrunk interval ends.

    Pre-jump: Phi per ph_cov_phi_vector with
    phi_1 = mixing_lambda * shrunk_lb + (1 - mixing_lambda) * shrunk_ub.
    Post-jump (states |0>, |1>): Phi = -gamma_z psi, which freezes the pole
    and leaves jump rates gamma_-+ to the opposite pole.
    """

    rates: PhaseCovariantRates
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def _phi1(self, alpha: float, t: float, ctx: PolicyContext) -> float:
        gp, gm, gz = self.rates.at(t)
        b = phi_bounds_ph_cov(abs(alpha), gp, gm, gz, ctx.epsilon_shrink, self.numeric)
        return ctx.mixing_lambda * b.shrunk_lb + (1.0 - ctx.mixing_lambda) * b.shrunk_ub

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        gz = self.rates.gamma_z(t)
        if ctx.has_jumped:
            return -gz * np.asarray(psi, dtype=complex)
        alpha, _beta, phase = _real_gauge_01(psi, self.numeric)
        phi1 = self._phi1(alpha, t, ctx)
        return phase * ph_cov_phi_vector(alpha, gz, phi1)


@dataclass(frozen=True)
class ThetaSwitchPhi:
    """Pole jumps with phi_1 switched between the interval ends by the initial angle.

    phi_1 = shrunk_lb when initial_theta >= theta_bar (inclusive), else
    shrunk_ub; the switch steers the deterministic track away from the
    interval-collapse locus when P-divisibility breaks.
    """

    rates: PhaseCovariantRates
    theta_bar: float | None = None
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        gp, gm, gz = self.rates.at(t)
        if ctx.has_jumped:
            return -gz * np.asarray(psi, dtype=complex)
        alpha, _beta, phase = _real_gauge_01(psi, self.numeric)
        bar = self.theta_bar if self.theta_bar is not None else ctx.theta_bar
        b = phi_bounds_ph_cov(abs(alpha), gp, gm, gz, ctx.epsilon_shrink, self.numeric)
        phi1 = b.shrunk_lb if ctx.initial_theta >= bar else b.shrunk_ub
        return phase * ph_cov_phi_vector(alpha, gz, phi1)


@dataclass(frozen=True)
class PlusMinusEnmPhi:
    """Jumps to |+>, |-> for equal-pumping phase covariant dynamics.

    Pre-jump Phi = 2 (gamma - gamma_z) sqrt(1 - alpha_-^2) |+>, the
    equal-rate generalization of the printed gamma = 1 form; post-jump
    Phi = -(gamma/2) psi keeps |+-> frozen with mutual jump rate
    gamma/2 + gamma_z.
    """

    rates: PhaseCovariantRates
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        gp, gm, gz = self.rates.at(t)
        gamma = _require_equal_pumping(gp, gm)
        if ctx.has_jumped:
            return -(0.5 * gamma) * np.asarray(psi, dtype=complex)
        alpha_m, beta_p, phase = _pm_components(psi)
        if abs(alpha_m.imag) > self.numeric.gauge_tol:
            raise GaugeError("alpha_- has a nonzero imaginary part (gauge broken)")
        return phase * (2.0 * (gamma - gz) * beta_p) * KET_PLUS


@dataclass(frozen=True)
class PlusMinusNonPPhi:
    """Jumps to |+>, |-> with a free component phi_- along |->.

    Works when the sigma_z poles have left the positivity domain
    (gamma_+ = gamma_- < 0 in windows).  phi_- is chosen through
    zeta = phi_- alpha_- inside its admissible interval by ``selector``;
    undefined at alpha_- = 0 (pre-jump), where DegenerateAmplitude is raised.
    """

    rates: PhaseCovariantRates
    selector: float = 0.5
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        gp, gm, gz = self.rates.at(t)
        gamma = _require_equal_pumping(gp, gm)
        if ctx.has_jumped:
            return -(0.5 * gamma) * np.asarray(psi, dtype=complex)
        alpha_m, beta_p, phase = _pm_components(psi)
        if abs(alpha_m.imag) > self.numeric.gauge_tol:
            raise GaugeError("alpha_- has a nonzero imaginary part (gauge broken)")
        am = alpha_m.real
        if abs(am) < self.numeric.pole_tol:
            raise DegenerateAmplitude("phi_- construction divides by alpha_- = 0")
        b2 = beta_p * beta_p
        if b2 < self.numeric.pole_tol:
            raise DegenerateAmplitude("phi_+ construction diverges at beta_+ = 0")
        zeta_lb = -0.5 * gamma - gz * b2
        zeta_ub = am * am * (0.5 * gamma + gz * am * am + 2.0 * b2 * (gamma - gz)) / b2
        span = max(zeta_ub - zeta_lb, 0.0)
        zeta = zeta_lb + self.selector * span
        phi_minus = zeta / am
        phi_plus = (beta_p / am) * (2.0 * am * (gamma - gz) - phi_minus)
        return phase * (phi_plus * KET_PLUS + phi_minus * KET_MINUS)


@dataclass(frozen=True)
class DrivenXiPhi:
    """Jumps to |+>, |-> for the transversally driven damped qubit.

    The transformation does not involve the drive at all, so it works for any
    beta/gamma ratio; xi = 2 Re(phi_- alpha*) is placed inside [xi_lb, xi_ub]
    by ctx.xi_selector.  Undefined at |alpha| in {0, 1} pre-jump (the |+->
    poles), which the post-jump branch covers.
    """

    rates: PhaseCovariantRates
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        gp, gm, gz = self.rates.at(t)
        gamma = _require_equal_pumping(gp, gm)
        if ctx.has_jumped:
            return -(0.5 * gamma) * np.asarray(psi, dtype=complex)
        alpha, beta, phase = _pm_components(psi)  # alpha complex, beta real >= 0
        a = abs(alpha)
        if a < self.numeric.pole_tol:
            raise DegenerateAmplitude("xi construction divides by alpha* = 0")
        if beta < self.numeric.pole_tol:
            raise DegenerateAmplitude("xi construction undefined at |alpha| = 1")
        bounds = xi_bounds(alpha, gamma, gz, self.numeric)
        xi = bounds.lb + ctx.xi_selector * max(bounds.ub - bounds.lb, 0.0)
        phi_minus = xi * alpha / (2.0 * a * a)
        phi_plus = (beta / np.conj(alpha)) * (
            2.0 * gamma * alpha.real - 2.0 * gz * alpha - np.conj(phi_minus)
        )
        return phase * (phi_plus * KET_PLUS + phi_minus * KET_MINUS)


@dataclass(frozen=True)
class OrthogonalWPhi:
    """Phi reproducing orthogonal W-jumps inside the general engine.

    c11 = None picks the minimal admissible value -<psi|J[P]|psi>, giving a
    zero deterministic eigenvalue.
    """

    model: MasterEquationModel
    c11: float | None = None
    numeric: NumericPolicy = DEFAULT_NUMERIC

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        from .unravel import orthogonal_jump_phi, pole_phi

        if self.c11 is None:
            return pole_phi(self.model, t, psi, self.numeric)
        return orthogonal_jump_phi(self.model, t, psi, self.c11, self.numeric)


@dataclass(frozen=True)
class COperatorPhi:
    """Phi = C(t) psi for a state-independent gauge operator."""

    c_operator: Callable[[float], np.ndarray]

    def __call__(self, psi: np.ndarray, t: float, ctx: PolicyContext) -> np.ndarray:
        return np.asarray(self.c_operator(t), dtype=complex) @ np.asarray(psi, dtype=complex)


def phi_policy_ph_cov(rates: PhaseCovariantRates,
                      numeric: NumericPolicy = DEFAULT_NUMERIC) -> PhiPolicy:
    return PhiPolicy(
        kind="builtin",
        name="ph_cov_poles",
        evaluate=PoleJumpPhi(rates, numeric),
        pole_states=(KET_0.copy(), KET_1.copy()),
        pole_labels=("0", "1"),
    )


def phi_policy_theta_switch(rates: PhaseCovariantRates, theta_bar: float | None = None,
                            numeric: NumericPolicy = DEFAULT_NUMERIC) -> PhiPolicy:
    return PhiPolicy(
        kind="builtin",
        name="theta_switch",
        evaluate=ThetaSwitchPhi(rates, theta_bar, numeric),
        pole_states=(KET_0.copy(), KET_1.copy()),
        pole_labels=("0", "1"),
    )


def phi_policy_pm_enm(rates: PhaseCovariantRates,
                      numeric: NumericPolicy = DEFAULT_NUMERIC) -> PhiPolicy:
    return PhiPolicy(
        kind="builtin",
        name="pm_enm",
        evaluate=PlusMinusEnmPhi(rates, numeric),
        pole_states=(KET_PLUS.copy(), KET_MINUS.copy()),
        pole_labels=("plus", "minus"),
    )


def phi_policy_pm_non_p(rates: PhaseCovariantRates, selector: float = 0.5,
                        numeric: NumericPolicy = DEFAULT_NUMERIC) -> PhiPolicy:
    return PhiPolicy(
        kind="builtin",
        name="pm_non_p",
        evaluate=PlusMinusNonPPhi(rates, selector, numeric),
        pole_states=(KET_PLUS.copy(), KET_MINUS.copy()),
        pole_labels=("plus", "minus"),
    )


def phi_policy_driven(rates: PhaseCovariantRates,
                      numeric: NumericPolicy = DEFAULT_NUMERIC) -> PhiPolicy:
    return PhiPolicy(
        kind="builtin",
        name="driven_xi",
        evaluate=DrivenXiPhi(rates, numeric),
        pole_states=(KET_PLUS.copy(), KET_MINUS.copy()),
        pole_labels=("plus", "minus"),
    )


def phi_policy_orthogonal(model: MasterEquationModel, c11: float | None = None,
                          numeric: NumericPolicy = DEFAULT_NUMERIC) -> PhiPolicy:
    return PhiPolicy(
        kind="orthogonal_w_mode",
        name="orthogonal_w",
        evaluate=OrthogonalWPhi(model, c11, numeric),
    )


def phi_policy_c_operator(c_operator: Callable[[float], np.ndarray]) -> PhiPolicy:
    return PhiPolicy(kind="c_operator", name="c_operator", evaluate=COperatorPhi(c_operator))


def phi_policy_explicit(fn: Callable[[np.ndarray, float, PolicyContext], np.ndarray],
                        name: str = "explicit") -> PhiPolicy:
    return PhiPolicy(kind="explicit_phi", name=name, evaluate=fn)


# --------------------------------------------------------------------------
# kappa-theta positivity scan
# --------------------------------------------------------------------------


@dataclass
class KappaScanResult:
    kappa_grid: np.ndarray
    theta_grid: np.ndarray
    positive: np.ndarray               # (n_kappa, n_theta) bool
    kappa_max_estimate: float          # largest kappa positive for every theta
    kappa_max_bracket: tuple[float, float]
    margins: np.ndarray                # (n_kappa, n_theta) min rate margin

    def row_all_positive(self) -> np.ndarray:
        return self.positive.all(axis=1)


def _scan_kappa_cell_batch(args: tuple) -> tuple[int, np.ndarray]:
    """Positivity margins for one kappa over a theta batch (vectorized RK4).

    The deterministic track visits exactly the states any pre-jump trajectory
    can occupy, and the poles cover everything post-jump, so the minimal rate
    margin along the track decides positivity for the whole ensemble.
    """
    (idx, kappa, thetas, theta_bar, eps_shrink, t_max, dt) = args
    rates = oscillating_dephasing_rates(kappa)
    all_a = np.cos(thetas)
    all_b = np.sin(thetas)
    margins = np.full(len(thetas), np.inf)
    interior = (all_a > 1e-9) & (all_b > 1e-9)
    a = all_a[interior]
    beta = all_b[interior]
    use_lb = (thetas >= theta_bar)[interior]

    def phi1_and_margin(t, a, beta):
        gp, gm, gz = rates.at(t)
        lb = -a * a * gp / beta - gz * beta
        ub = beta**3 * gm / (a * a) + 3.0 * beta * gz
        phi1 = np.where(use_lb, lb + 2.0 * eps_shrink, ub - 2.0 * eps_shrink)
        lam1 = a * a * gp + gz * beta * beta + beta * phi1
        lam0 = beta * beta * gm + 3.0 * a * a * gz - a * a / beta * phi1
        return phi1, np.minimum(lam0, lam1), gp, gm, gz

    def deriv(t, a, beta):
        phi1, _, gp, gm, gz = phi1_and_margin(t, a, beta)
        phi0 = a * (2.0 * gz - phi1 / beta)
        f0 = -0.5 * (gp + gz) * a - 0.5 * phi0
        f1 = -0.5 * (gm + gz) * beta - 0.5 * phi1
        c = (gp + gz) * a * a + (gm + gz) * beta * beta + a * phi0 + beta * phi1
        return f0 + 0.5 * c * a, f1 + 0.5 * c * beta

    n = int(round(t_max / dt))
    t = 0.0
    for _ in range(n):
        gp, gm, _ = rates.at(t)
        pole_margin = min(gp, gm)  # post-jump rates at |0>, |1>
        if len(a):
            _, m, *_ = phi1_and_margin(t, a, beta)
            margins[interior] = np.minimum(margins[interior], m)
        margins = np.minimum(margins, pole_margin)
        if len(a):
            k1 = deriv(t, a, beta)
            k2 = deriv(t + 0.5 * dt, a + 0.5 * dt * k1[0], beta + 0.5 * dt * k1[1])
            k3 = deriv(t + 0.5 * dt, a + 0.5 * dt * k2[0], beta + 0.5 * dt * k2[1])
            k4 = deriv(t + dt, a + dt * k3[0], beta + dt * k3[1])
            an = a + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            bn = beta + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            nrm = np.hypot(an, bn)
            a = an / nrm
            beta = bn / nrm
        t += dt
    return idx, margins


def kappa_scan(
    theta_bar: float,
    kappa_grid: Sequence[float],
    theta_grid: Sequence[float],
    n_traj: int = 1,
    t_max: float = 10.0,
    dt: float = 2e-3,
    base_seed: int = 0,
    worker_count: int = 1,
    eps_shrink: float = 0.0,
    rate_clip: float = DEFAULT_NUMERIC.rate_clip,
) -> KappaScanResult:
    """Positivity map of the theta-switch unraveling over (kappa, theta).

    A cell is positive iff every jump rate along its deterministic track and
    at the poles stays above -rate_clip for all grid times; this covers every
    state any trajectory can visit, so the verdict is deterministic and
    n_traj (kept for interface compatibility) adds no information.
    """
    kappa_grid = np.asarray(list(kappa_grid), dtype=float)
    theta_grid = np.asarray(list(theta_grid), dtype=float)
    jobs = [
        (i, float(k), theta_grid.copy(), theta_bar, eps_shrink, t_max, dt)
        for i, k in enumerate(kappa_grid)
    ]
    if worker_count > 1 and len(jobs) > 1:
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(min(worker_count, len(jobs))) as pool:
                results = pool.map(_scan_kappa_cell_batch, jobs)
        except ValueError:
            results = [_scan_kappa_cell_batch(j) for j in jobs]
    else:
        results = [_scan_kappa_cell_batch(j) for j in jobs]
    margins = np.zeros((len(kappa_grid), len(theta_grid)))
    for idx, m in results:
        margins[idx] = m
    positive = margins >= -rate_clip

    all_pos = positive.all(axis=1)
    if all_pos.any():
        k_ok = kappa_grid[all_pos]
        kappa_max = float(k_ok.max())
        above = kappa_grid[kappa_grid > kappa_max]
        bracket = (kappa_max, float(above.min()) if len(above) else np.inf)
    else:
        kappa_max = float("nan")
        bracket = (float("nan"), float(kappa_grid.min()))
    return KappaScanResult(kappa_grid, theta_grid, positive, kappa_max, bracket, margins)


# --------------------------------------------------------------------------
# registries for the configuration layer
# --------------------------------------------------------------------------


@dataclass
class ModelBundle:
    """A zoo model plus the structured rate family, when it has one."""

    model: MasterEquationModel
    rates: PhaseCovariantRates | None
    name: str


def _num(params: dict, key: str, default=None):
    if key in params:
        val = params[key]
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ConfigError(f"model parameter '{key}' must be a number")
        return float(val)
    if default is None:
        raise ConfigError(f"missing model parameter '{key}'")
    return float(default)


def _rate_fn(params: dict, key: str):
    """A rate from config: a constant number or tabulated (t, value) samples."""
    if key not in params:
        raise ConfigError(f"missing model parameter '{key}'")
    val = params[key]
    if isinstance(val, dict) and "tabulated" in val:
        tab = val["tabulated"]
        try:
            times = tuple(float(x) for x in tab["times"])
            values = tuple(float(x) for x in tab["values"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model parameter '{key}.tabulated' malformed: {exc}") from exc
        if len(times) != len(values) or len(times) < 2:
            raise ConfigError(f"'{key}.tabulated' needs matching times/values, length >= 2")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"'{key}.tabulated' times must be strictly increasing")
        return TabulatedRate(times, values)
    return ConstantRate(_num(params, key))


def build_model(name: str, params: dict) -> ModelBundle:
    params = dict(params or {})
    if name == "enm":
        return ModelBundle(enm_model(), enm_rates(), name)
    if name == "oscillating_dephasing":
        rates = oscillating_dephasing_rates(_num(params, "kappa"))
        return ModelBundle(phase_covariant_model(rates), rates, name)
    if name == "negative_pumping":
        rates = negative_pumping_rates(_num(params, "kappa"))
        return ModelBundle(phase_covariant_model(rates), rates, name)
    if name == "driven":
        gamma = _num(params, "gamma", 1.0)
        beta = _num(params, "beta")
        return ModelBundle(driven_model(gamma, beta), driven_rates(gamma), name)
    if name == "pure_dephasing":
        return ModelBundle(pure_dephasing_model(_num(params, "gamma")), None, name)
    if name == "phase_covariant":
        rates = PhaseCovariantRates(
            _rate_fn(params, "gamma_plus"),
            _rate_fn(params, "gamma_minus"),
            _rate_fn(params, "gamma_z"),
        )
        h_z = params.get("h_z")
        coeff = ConstantRate(float(h_z)) if h_z is not None else None
        return ModelBundle(phase_covariant_model(rates, coeff), rates, name)
    raise ConfigError(f"unknown model '{name}'")


MODEL_NAMES = (
    "enm",
    "oscillating_dephasing",
    "negative_pumping",
    "driven",
    "pure_dephasing",
    "phase_covariant",
)


def build_policy(name: str, bundle: ModelBundle, params: dict) -> PhiPolicy:
    params = dict(params or {})
    needs_rates = {"ph_cov_poles", "theta_switch", "pm_enm", "pm_non_p", "driven_xi"}
    if name in needs_rates and bundle.rates is None:
        raise ConfigError(f"policy '{name}' requires a phase covariant rate family")
    if name == "ph_cov_poles":
        return phi_policy_ph_cov(bundle.rates)
    if name == "theta_switch":
        bar = params.get("theta_bar")
        return phi_policy_theta_switch(bundle.rates, float(bar) if bar is not None else None)
    if name == "pm_enm":
        return phi_policy_pm_enm(bundle.rates)
    if name == "pm_non_p":
        return phi_policy_pm_non_p(bundle.rates, float(params.get("selector", 0.5)))
    if name == "driven_xi":
        return phi_policy_driven(bundle.rates)
    if name == "orthogonal_w":
        c11 = params.get("c11")
        return phi_policy_orthogonal(bundle.model, float(c11) if c11 is not None else None)
    if name == "c_operator":
        c_kind = params.get("c", "zero")
        if c_kind == "zero":
            op = ConstantMatrix(np.zeros((2, 2), dtype=complex))
        elif c_kind == "identity":
            op = ConstantMatrix(float(params.get("scale", 1.0)) * np.eye(2, dtype=complex))
        else:
            raise ConfigError(f"unknown c_operator form '{c_kind}'")
        return phi_policy_c_operator(op)
    raise ConfigError(f"unknown policy '{name}'")


POLICY_NAMES = (
    "ph_cov_poles",
    "theta_switch",
    "pm_enm",
    "pm_non_p",
    "driven_xi",
    "orthogonal_w",
    "c_operator",
)


@dataclass(frozen=True)
class ConstantMatrix:
    matrix: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        return self.matrix
