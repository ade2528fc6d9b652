"""P-divisibility witnesses and the positivity domain of the jump term.

A time-local generator is P-divisible at t iff

    sum_a g_a(t) |<phi_i| L_a(t) |phi_j>|^2 >= 0

for every orthonormal basis and i != j.  The positivity domain collects the
pure states psi whose projected jump image (1-P) J_t[P_psi] (1-P) is positive
semidefinite on the orthogonal complement; a positive-rate unraveling can only
ever occupy states inside this set.  For qubits the complement is
one-dimensional, so the domain membership test is a single closed-form
witness, and the phase covariant family admits an explicit polynomial in
z = <psi|sigma_z|psi>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .core import bloch_vector, hermitian_eigendecomposition, orthogonal_state_2d, projector
from .errors import BasisError, DimensionError
from .master import MasterEquationModel, jump_apply, jump_image_state
from .numeric import DEFAULT_NUMERIC, NumericPolicy


def p_div_witness(
    model: MasterEquationModel,
    t: float,
    basis: list[np.ndarray],
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> float:
    """Minimal off-diagonal rate sum over the basis; negative certifies non-P-divisibility."""
    d = model.dimension
    if len(basis) != d:
        raise BasisError(f"expected {d} basis vectors, got {len(basis)}")
    mat = np.stack(basis)
    gram = mat.conj() @ mat.T
    if np.abs(gram - np.eye(d)).max() > numeric.basis_tol:
        raise BasisError("basis is not orthonormal within tolerance")
    rates = model.rates(t)
    best = np.inf
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            amps = np.einsum("i,aij,j->a", mat[i].conj(), model.ops, mat[j])
            best = min(best, float(np.dot(rates, np.abs(amps) ** 2)))
    return best


def phase_covariant_p_div(gamma_plus: float, gamma_minus: float, gamma_z: float) -> bool:
    """P-divisibility of the phase covariant family at one instant."""
    return (
        gamma_plus >= 0.0
        and gamma_minus >= 0.0
        and gamma_z >= -0.5 * np.sqrt(gamma_plus * gamma_minus)
    )


def domain_witness(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> float:
    """Minimal eigenvalue of the jump image restricted to the complement of psi.

    Exactly the quantity whose sign decides positivity-domain membership; for
    d = 2 the complement is a single state and no diagonalization is needed.
    """
    from .core import check_normalized

    psi = check_normalized(psi, numeric)
    j_image = jump_image_state(model, t, psi)
    if model.dimension == 2:
        perp = orthogonal_state_2d(psi)
        return float(np.real(perp.conj() @ j_image @ perp))
    comp = _complement_basis(psi)
    block = comp.conj().T @ j_image @ comp
    return float(np.linalg.eigvalsh(0.5 * (block + block.conj().T)).min())


def _complement_basis(psi: np.ndarray) -> np.ndarray:
    d = len(psi)
    q, _ = np.linalg.qr(np.column_stack([psi, np.eye(d, dtype=complex)]))
    return q[:, 1:d]


def in_positivity_domain(
    model: MasterEquationModel,
    t: float,
    psi: np.ndarray,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> bool:
    return domain_witness(model, t, psi, numeric) >= -numeric.domain_tol


@dataclass(frozen=True)
class DomainQuery:
    """Inputs of the equal-rate domain threshold: z = <sigma_z> and the ratio g."""

    z: float
    g: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.z <= 1.0:
            raise ValueError("z must lie in [-1, 1]")
        if self.g < 0.0:
            raise ValueError("g must be nonnegative")


def phase_covariant_domain(
    gamma_plus: float,
    gamma_minus: float,
    gamma_z: float,
    z: float,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> tuple[float, bool]:
    """(D, in_domain) for the phase covariant family.

    D is the squared-norm derivative coefficient: ||r(t+dt)||^2 = 1 - dt*D on
    pure states with z = <psi|sigma_z|psi>, equal to four times the complement
    witness.  Membership is D >= 0 up to tolerance.  With sigma_z|0> = +|0>
    and sigma_plus = |1><0| the linear term carries 2z(gamma_plus -
    gamma_minus); it vanishes for equal rates.
    """
    if abs(z) > 1.0 + 1e-12:
        raise DimensionError("z must lie in [-1, 1]")
    d_coeff = (
        gamma_plus
        + gamma_minus
        + 4.0 * gamma_z
        + 2.0 * z * (gamma_plus - gamma_minus)
        + z * z * (gamma_plus + gamma_minus - 4.0 * gamma_z)
    )
    return d_coeff, d_coeff >= -4.0 * numeric.domain_tol


def domain_boundary_from_g(g: float) -> float | None:
    """|z| threshold sqrt((g-2)/(g+2)) of the equal-rate family, g = 4*gamma_z/|gamma|.

    Returns None for g < 2 (empty domain) and 0.0 exactly at g = 2 (equator
    only).  The ratio g measures dephasing gain against the negative
    excitation/decay rate gamma < 0 (with gamma_z > 0).
    """
    if g < 2.0:
        return None
    return float(np.sqrt((g - 2.0) / (g + 2.0)))


def equal_rate_domain_boundary(gamma: float, gamma_z: float) -> float | None:
    """|z| boundary for gamma_plus = gamma_minus = gamma < 0, gamma_z > 0."""
    if gamma >= 0.0:
        return 1.0
    if gamma_z <= 0.0:
        return None
    return domain_boundary_from_g(4.0 * gamma_z / abs(gamma))


def fibonacci_bloch_lattice(m: int) -> np.ndarray:
    """Deterministic near-uniform sample of the Bloch sphere (m x 3)."""
    i = np.arange(m)
    z = 1.0 - 2.0 * (i + 0.5) / m
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _bloch_to_state(points: np.ndarray) -> np.ndarray:
    """Pure states (n x 2) for unit Bloch vectors (n x 3)."""
    z = np.clip(points[:, 2], -1.0, 1.0)
    theta = np.arccos(z)
    phi = np.arctan2(points[:, 1], points[:, 0])
    return np.column_stack(
        [np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)]
    )


def batched_domain_witness(
    model: MasterEquationModel, t: float, states: np.ndarray
) -> np.ndarray:
    """domain_witness evaluated on a batch of qubit states (vectorized)."""
    if model.dimension != 2:
        raise DimensionError("batched witness implemented for d = 2")
    perp = np.column_stack([-states[:, 1].conj(), states[:, 0].conj()])
    rates = model.rates(t)
    amps = np.einsum("ni,aij,nj->na", perp.conj(), model.ops, states)
    return (np.abs(amps) ** 2) @ rates


@dataclass
class DomainReportRow:
    t: float
    domain_fraction: float
    contains_orthonormal_basis: bool
    rho_decomposable: str  # yes | no | inconclusive


def necessary_conditions_report(
    model: MasterEquationModel,
    grid: np.ndarray,
    rhos: np.ndarray,
    sample_count: int = 2048,
    numeric: NumericPolicy = DEFAULT_NUMERIC,
) -> list[DomainReportRow]:
    """Per-time-step check of the two necessary conditions for positive unravelings.

    Condition 1 (the domain contains an orthonormal basis) is tested on
    antipodal pairs of a Fibonacci lattice; condition 2 (the evolved state is
    a convex combination of domain projectors) is a sufficient test only:
    "yes" when rho's own eigenvectors all lie in the domain (exact witness,
    covers pure and near-pure states) or when rho's Bloch vector lies in the
    convex hull of the sampled domain points; "no" when the sampled domain is
    empty; "inconclusive" otherwise — the underlying conditions are only
    necessary, so a failed hull test proves nothing.
    """
    if model.dimension != 2:
        raise DimensionError("report implemented for d = 2 (Bloch geometry)")
    points = fibonacci_bloch_lattice(sample_count)
    states = _bloch_to_state(points)
    anti_states = _bloch_to_state(-points)
    rows: list[DomainReportRow] = []
    for t, rho in zip(grid, rhos):
        w = batched_domain_witness(model, t, states)
        w_anti = batched_domain_witness(model, t, anti_states)
        inside = w >= -numeric.domain_tol
        inside_anti = w_anti >= -numeric.domain_tol
        frac = float(inside.mean())
        basis_ok = bool(np.any(inside & inside_anti))
        r_rho = bloch_vector(rho)
        domain_pts = points[inside]
        if len(domain_pts) == 0:
            flag = "no"
        else:
            flag = "inconclusive"
            eig_states = [v for _, v in hermitian_eigendecomposition(rho, numeric)]
            if all(domain_witness(model, t, v, numeric) >= -numeric.domain_tol
                   for v in eig_states):
                flag = "yes"
            elif len(domain_pts) >= 4:
                try:
                    hull = Delaunay(domain_pts)
                    if hull.find_simplex(r_rho) >= 0:
                        flag = "yes"
                except QhullError:
                    flag = "inconclusive"
        rows.append(DomainReportRow(float(t), frac, basis_ok, flag))
    return rows
