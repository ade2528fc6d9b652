"""qtraj: stochastic quantum-jump unravelings of time-local master equations.

The package simulates open-qubit dynamics four ways (MCWF, W-ROQJ, R-ROQJ and
the generalized state-dependent psi-ROQJ), integrates the master equation
exactly as the reference oracle, analyzes P-divisibility and the positivity
domain of the jump term, and ships the concrete rate families and
transformation policies used by the desk-scale experiments.
"""

__version__ = "0.1.0"

from .core import (
    KET_MINUS,
    KET_PLUS,
    KET_0,
    KET_1,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    bloch_vector,
    density_from_bloch,
    fix_gauge,
    hermitian_eigendecomposition,
    normalize,
    projector,
    state_bloch,
    theta_state,
)
from .errors import (
    BasisError,
    ConfigError,
    ConstraintError,
    DegenerateAmplitude,
    DimensionError,
    GaugeError,
    NegativeRateError,
    NonHermitianInput,
    NormalizationError,
    PoleState,
    PolicyError,
    PositivityViolation,
    ProbabilityOverflow,
    QtrajError,
    SchemaError,
    StepSizeError,
)
from .master import (
    GaugeTransformation,
    LindbladTerm,
    MasterEquationModel,
    driving_apply,
    effective_hamiltonian,
    exact_solve,
    gauge_transform,
    generator_apply,
    jump_apply,
    time_grid,
)
from .divisibility import (
    domain_boundary_from_g,
    domain_witness,
    equal_rate_domain_boundary,
    fibonacci_bloch_lattice,
    in_positivity_domain,
    necessary_conditions_report,
    p_div_witness,
    phase_covariant_domain,
    phase_covariant_p_div,
)
from .numeric import DEFAULT_NUMERIC, NumericPolicy
from .unravel import (
    EnsembleResult,
    PhiPolicy,
    PolicyContext,
    RateOperatorResult,
    TrajectoryRecord,
    build_rate_operator,
    mcwf_step,
    orthogonal_jump_phi,
    pole_phi,
    psi_roqj_step,
    r_roqj_step,
    run_ensemble,
    run_trajectory,
    w_roqj_step,
    waiting_time_jump_sampler,
)
from .zoo import (
    KappaScanResult,
    PhaseCovariantRates,
    PhiBounds,
    XiBounds,
    driven_model,
    driven_rates,
    enm_model,
    enm_rates,
    kappa_scan,
    negative_pumping_rates,
    oscillating_dephasing_rates,
    p_div_violation,
    phase_covariant_model,
    phi_bounds_ph_cov,
    phi_policy_c_operator,
    phi_policy_driven,
    phi_policy_explicit,
    phi_policy_orthogonal,
    phi_policy_ph_cov,
    phi_policy_pm_enm,
    phi_policy_pm_non_p,
    phi_policy_theta_switch,
    pure_dephasing_model,
    xi_bounds,
)
