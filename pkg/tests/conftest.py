import numpy as np
import pytest

from qtraj.master import LindbladTerm, MasterEquationModel
from qtraj.zoo import ConstantRate, PhaseCovariantRates, phase_covariant_model


def random_state(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng: np.random.Generator, d: int = 2, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_model(rng: np.random.Generator, d: int = 2, n_terms: int = 3,
                 allow_negative: bool = True) -> MasterEquationModel:
    """Constant-rate model with random operators; rates may dip negative."""
    terms = []
    for _ in range(n_terms):
        op = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        lo = -0.5 if allow_negative else 0.05
        terms.append(LindbladTerm(op, ConstantRate(float(rng.uniform(lo, 1.5)))))
    h = random_hermitian(rng, d)
    return MasterEquationModel(dimension=d, hamiltonian=lambda t, h=h: h, terms=terms)


def random_p_divisible_rates(rng: np.random.Generator) -> tuple[float, float, float]:
    gp = float(rng.uniform(0.05, 2.0))
    gm = float(rng.uniform(0.05, 2.0))
    gz = float(-0.5 * np.sqrt(gp * gm) + rng.uniform(0.0, 2.0))
    return gp, gm, gz


def constant_ph_cov_model(gp: float, gm: float, gz: float):
    rates = PhaseCovariantRates(ConstantRate(gp), ConstantRate(gm), ConstantRate(gz))
    return phase_covariant_model(rates), rates


class FakeRng:
    """Deterministic stand-in for numpy Generator in single-step tests."""

    def __init__(self, values):
        self.values = list(values)

    def random(self, size=None):
        if size is None:
            return self.values.pop(0)
        out = np.array([self.values.pop(0) for _ in range(size)])
        return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
