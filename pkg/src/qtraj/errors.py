"""Exception types raised by the trajectory engine and its support layers."""

from __future__ import annotations


class QtrajError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(QtrajError):
    """Operation requires a specific Hilbert-space dimension (usually d = 2)."""


class NonHermitianInput(QtrajError):
    """A matrix that must be Hermitian violates the Hermiticity tolerance."""


class NormalizationError(QtrajError):
    """A state vector is not normalized (or has zero norm)."""


class BasisError(QtrajError):
    """A supplied set of vectors is not an orthonormal basis."""


class StepSizeError(QtrajError):
    """Integration step exceeds the stability guard for the given model."""


class PolicyError(QtrajError):
    """A transformation policy returned a malformed vector."""


class NegativeRateError(QtrajError):
    """MCWF invoked while some Lindblad rate is negative."""

    def __init__(self, t: float, rates) -> None:
        self.t = t
        self.rates = list(rates)
        super().__init__(f"negative Lindblad rate at t={t:g}: {self.rates}")


class PositivityViolation(QtrajError):
    """A jump-rate eigenvalue dropped below the roundoff tolerance.

    Carries the time, the state and the offending eigenvalue so that runs can
    report exactly where the unraveling stopped being positive.
    """

    def __init__(self, t: float, psi, min_eigenvalue: float, detail: str = "") -> None:
        self.t = t
        self.psi = psi
        self.min_eigenvalue = min_eigenvalue
        msg = f"negative jump rate {min_eigenvalue:.3e} at t={t:.6g}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ProbabilityOverflow(QtrajError):
    """Summed per-step jump probability too large for the Bernoulli sampler."""


class ConstraintError(QtrajError):
    """A free parameter violates its admissibility constraint."""


class PoleState(QtrajError):
    """State-dependent bounds requested at a pole where they diverge."""


class GaugeError(QtrajError):
    """State left the real-amplitude gauge a policy relies on."""


class DegenerateAmplitude(QtrajError):
    """Policy formula undefined because a basis amplitude is (near) zero."""


class ConfigError(QtrajError):
    """Run configuration is malformed or references unknown zoo entries."""


class SchemaError(QtrajError):
    """A CSV input does not match the documented header contract."""
