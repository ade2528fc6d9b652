import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtraj.core import (
    KET_MINUS,
    KET_PLUS,
    KET_0,
    KET_1,
    SIGMA_Z,
    bloch_vector,
    density_from_bloch,
    fix_gauge,
    hermitian_eigendecomposition,
    normalize,
    orthogonal_state_2d,
    projector,
    state_bloch,
    theta_state,
)
from qtraj.errors import DimensionError, NonHermitianInput, NormalizationError

from conftest import random_density, random_hermitian, random_state


def test_sigma_z_spectrum():
    pairs = hermitian_eigendecomposition(SIGMA_Z)
    assert pairs[0][0] == pytest.approx(1.0, abs=1e-14)
    assert pairs[1][0] == pytest.approx(-1.0, abs=1e-14)
    assert np.allclose(pairs[0][1], KET_0)
    assert np.allclose(pairs[1][1], KET_1)


def test_identity_degenerate_tiebreak():
    pairs = hermitian_eigendecomposition(np.eye(2, dtype=complex))
    vals = [p[0] for p in pairs]
    assert vals == [1.0, 1.0]
    gram = np.array([[np.vdot(a[1], b[1]) for b in pairs] for a in pairs])
    assert np.abs(gram - np.eye(2)).max() < 1e-12
    # repeated calls give the identical pair (determinism)
    again = hermitian_eigendecomposition(np.eye(2, dtype=complex))
    for (_, v1), (_, v2) in zip(pairs, again):
        assert np.array_equal(v1, v2)


def test_rank_one_projector_spectrum():
    a = 0.7 * np.outer(KET_MINUS, KET_MINUS.conj())
    pairs = hermitian_eigendecomposition(a)
    assert pairs[0][0] == pytest.approx(0.7, abs=1e-12)
    assert pairs[1][0] == pytest.approx(0.0, abs=1e-12)
    assert np.abs(np.abs(np.vdot(pairs[0][1], KET_MINUS)) - 1.0) < 1e-12
    assert np.abs(np.abs(np.vdot(pairs[1][1], KET_PLUS)) - 1.0) < 1e-12


@pytest.mark.parametrize("d", [2, 4])
def test_eigendecomposition_random(rng, d):
    for _ in range(1000):
        a = random_hermitian(rng, d, scale=rng.uniform(0.1, 5.0))
        pairs = hermitian_eigendecomposition(a)
        vals = np.array([p[0] for p in pairs])
        assert np.all(np.diff(vals) <= 1e-12)  # descending
        vecs = np.stack([p[1] for p in pairs])
        gram = vecs.conj() @ vecs.T
        assert np.abs(gram - np.eye(d)).max() < 1e-10
        recon = sum(l * np.outer(v, v.conj()) for l, v in pairs)
        assert np.abs(recon - a).max() < 1e-10 * max(1.0, np.abs(a).max())


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianInput):
        hermitian_eigendecomposition(np.array([[0, 1], [0, 0]], dtype=complex))


def test_bloch_examples():
    assert np.allclose(bloch_vector(projector(KET_0)), [0, 0, 1], atol=1e-14)
    assert np.allclose(bloch_vector(projector(KET_PLUS)), [1, 0, 0], atol=1e-14)
    assert np.allclose(bloch_vector(0.5 * np.eye(2)), [0, 0, 0], atol=1e-14)


def test_bloch_roundtrip_random(rng):
    for _ in range(1000):
        rho = random_density(rng)
        x, y, z = bloch_vector(rho)
        back = density_from_bloch(x, y, z)
        assert np.abs(back - rho).max() < 1e-12


def test_bloch_dimension_error():
    with pytest.raises(DimensionError):
        bloch_vector(np.eye(3) / 3)


def test_projector_examples():
    assert np.allclose(projector(KET_0), np.diag([1, 0]), atol=1e-14)
    assert np.allclose(projector(KET_PLUS), 0.5 * np.ones((2, 2)), atol=1e-14)
    psi = np.array([1, 1j]) / np.sqrt(2)
    expected = np.array([[0.5, -0.5j], [0.5j, 0.5]])
    assert np.allclose(projector(psi), expected, atol=1e-14)


def test_projector_spectrum(rng):
    for _ in range(100):
        p = projector(random_state(rng))
        vals = sorted(np.linalg.eigvalsh(p))
        assert vals[0] == pytest.approx(0.0, abs=1e-12)
        assert vals[1] == pytest.approx(1.0, abs=1e-12)


def test_projector_requires_normalized():
    with pytest.raises(NormalizationError):
        projector(np.array([1.0, 1.0]))


def test_normalize():
    v = normalize(np.array([3.0, 4.0j]))
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12
    with pytest.raises(NormalizationError):
        normalize(np.zeros(2))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=4)
)
def test_fix_gauge_property(amps):
    v = np.array([complex(re, im) for re, im in amps])
    if np.linalg.norm(v) < 1e-6:
        return
    g = fix_gauge(v)
    assert abs(np.linalg.norm(g) - np.linalg.norm(v)) < 1e-12 * max(1, np.linalg.norm(v))
    nonzero = [c for c in g if abs(c) > 1e-12 * np.linalg.norm(v)]
    if nonzero:
        first = nonzero[0]
        assert first.real >= 0
        assert abs(first.imag) <= 1e-9 * abs(first)


def test_orthogonal_state(rng):
    for _ in range(50):
        psi = random_state(rng)
        perp = orthogonal_state_2d(psi)
        assert abs(np.vdot(psi, perp)) < 1e-12


def test_theta_state_and_bloch():
    psi = theta_state(0.3)
    assert psi[0] == pytest.approx(np.cos(0.3))
    x, y, z = state_bloch(psi)
    assert z == pytest.approx(np.cos(0.6))
    assert x == pytest.approx(np.sin(0.6))
