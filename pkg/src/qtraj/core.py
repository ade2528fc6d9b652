"""Dense complex linear algebra for small quantum systems.

States are plain complex ndarrays of length d, operators are d x d complex
ndarrays; this module supplies the semantic layer on top of them: gauge
fixing, projectors, Hermitian eigendecomposition with deterministic ordering
(closed form for d = 2, LAPACK otherwise), and Bloch-vector conversion for
qubits.  All functions are pure and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NonHermitianInput, NormalizationError
from .numeric import DEFAULT_NUMERIC, NumericPolicy

# Computational-basis conventions used throughout: sigma_z|0> = +|0>,
# sigma_plus = |1><0|.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def normalize(psi: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    """Return psi scaled to unit Euclidean norm.

    Raises NormalizationError on a (numerically) zero vector.
    """
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm < 1e-300 or not np.isfinite(nrm):
        raise NormalizationError(f"cannot normalize vector with norm {nrm}")
    return psi / nrm


def check_normalized(psi: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 10 * numeric.norm_tol:
        raise NormalizationError(f"state norm {np.linalg.norm(psi)} != 1")
    return psi


def fix_gauge(psi: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    """Multiply by a global phase so the first non-negligible amplitude is real >= 0."""
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    for comp in psi:
        if abs(comp) > numeric.norm_tol * max(nrm, 1.0):
            phase = comp / abs(comp)
            return psi * np.conj(phase)
    return psi.copy()


def projector(psi: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    """Rank-1 projector |psi><psi| of a normalized state."""
    psi = check_normalized(psi, numeric)
    return np.outer(psi, psi.conj())


def require_hermitian(a: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    scale = max(1.0, float(np.abs(a).max()) if a.size else 1.0)
    if np.abs(a - a.conj().T).max() > 100 * numeric.herm_tol * scale:
        raise NonHermitianInput(
            f"matrix deviates from Hermiticity by {np.abs(a - a.conj().T).max():.3e}"
        )
    return 0.5 * (a + a.conj().T)


def require_density_matrix(rho: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    """Validate Hermiticity, unit trace and near-positivity of rho."""
    rho = require_hermitian(rho, numeric)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > numeric.trace_tol * 10:
        raise NormalizationError(f"density matrix trace {tr} != 1")
    if np.linalg.eigvalsh(rho).min() < -numeric.psd_tol:
        raise NormalizationError("density matrix has a significantly negative eigenvalue")
    return rho


def _lex_key(v: np.ndarray) -> tuple:
    return tuple(x for comp in np.round(v, 12) for x in (comp.real, comp.imag))


def hermitian_eigendecomposition(
    a: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC
) -> list[tuple[float, np.ndarray]]:
    """Eigenpairs of a Hermitian matrix, eigenvalues descending.

    Ties are broken by the lexicographic order of the gauge-fixed eigenvectors
    so that seeded simulations are reproducible bit for bit.  For d = 2 a
    closed-form trace/determinant path avoids the LAPACK call in the
    trajectory hot loop.
    """
    a = require_hermitian(a, numeric)
    d = a.shape[0]
    if d == 2:
        return _eig2(a, numeric)
    vals, vecs = np.linalg.eigh(a)
    pairs = [(float(vals[i]), fix_gauge(vecs[:, i], numeric)) for i in range(d)]
    pairs.sort(key=lambda p: (-p[0], _lex_key(p[1])))
    return pairs


def _eig2(a: np.ndarray, numeric: NumericPolicy) -> list[tuple[float, np.ndarray]]:
    a00 = a[0, 0].real
    a11 = a[1, 1].real
    b = a[0, 1]
    mean = 0.5 * (a00 + a11)
    half_gap = 0.5 * (a00 - a11)
    radius = np.hypot(half_gap, abs(b))
    scale = max(abs(a00), abs(a11), abs(b), 1e-300)
    if radius <= 1e-14 * scale:
        # degenerate: a = mean * identity; canonical basis, ordered lexicographically
        return [(mean, KET_0.copy()), (mean, KET_1.copy())]
    hi, lo = mean + radius, mean - radius
    # eigenvector for hi: pick the better-conditioned column of (A - lo)
    v1 = np.array([b, hi - a00], dtype=complex)
    v2 = np.array([hi - a11, np.conj(b)], dtype=complex)
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    v = v / np.linalg.norm(v)
    w = np.array([-np.conj(v[1]), np.conj(v[0])])  # orthogonal complement in d=2
    return [(hi, fix_gauge(v, numeric)), (lo, fix_gauge(w, numeric))]


def orthogonal_state_2d(psi: np.ndarray) -> np.ndarray:
    """The unique (up to phase) state orthogonal to a qubit state, gauge fixed."""
    if len(psi) != 2:
        raise DimensionError("orthogonal_state_2d requires d = 2")
    return fix_gauge(np.array([-np.conj(psi[1]), np.conj(psi[0])]))


def bloch_vector(rho: np.ndarray, numeric: NumericPolicy = DEFAULT_NUMERIC) -> np.ndarray:
    """(x, y, z) with rho = (1 + x sx + y sy + z sz)/2; qubits only."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionError(f"Bloch vector defined for d = 2, got shape {rho.shape}")
    x = 2.0 * rho[1, 0].real
    y = 2.0 * rho[1, 0].imag
    z = (rho[0, 0] - rho[1, 1]).real
    return np.array([x, y, z])


def density_from_bloch(x: float, y: float, z: float) -> np.ndarray:
    r2 = x * x + y * y + z * z
    if r2 > 1.0 + 1e-9:
        raise NormalizationError(f"Bloch vector norm^2 {r2} exceeds 1")
    return 0.5 * (IDENTITY_2 + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def state_bloch(psi: np.ndarray) -> np.ndarray:
    """Bloch vector of a pure qubit state (without forming the projector)."""
    if len(psi) != 2:
        raise DimensionError("state_bloch requires d = 2")
    a, b = psi[0], psi[1]
    return np.array(
        [2.0 * (np.conj(a) * b).real, 2.0 * (np.conj(a) * b).imag, abs(a) ** 2 - abs(b) ** 2]
    )


def theta_state(theta: float, phi: float = 0.0) -> np.ndarray:
    """cos(theta)|0> + e^{i phi} sin(theta)|1>, the amplitude-angle parametrization."""
    return np.array([np.cos(theta), np.exp(1j * phi) * np.sin(theta)], dtype=complex)
