import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polalign.experiments import sample_uniform_basis
from polalign.photon_pair import (
    CoincidenceModel,
    DetectorPair,
    TwoPhotonState,
    coincidence_probability,
    coincidence_probability_fast,
    density_matrix,
    mean_coincidence_rate,
    projection_probability,
    sample_coincidences,
    sample_singles,
)
from polalign.polarization import StokesVector

S1 = StokesVector(1, 0, 0)
S2 = StokesVector(0, 1, 0)
SINGLET = TwoPhotonState(1.0)


@st.composite
def stokes(draw):
    v = np.array([draw(st.floats(-1, 1)) for _ in range(3)])
    n = np.linalg.norm(v)
    if n < 1e-3:
        return S1
    return StokesVector.from_array(v / n)


def test_singlet_examples():
    assert coincidence_probability(S1, S1, SINGLET) == pytest.approx(0, abs=1e-15)
    assert coincidence_probability(S1, -S1, SINGLET) == pytest.approx(0.5)
    assert coincidence_probability(S1, S2, SINGLET) == pytest.approx(0.25)


def test_decohered_example():
    p = coincidence_probability(S2, S2, TwoPhotonState(0.0))
    assert p == pytest.approx(0.25, abs=1e-15)
    assert projection_probability(S2, S2, TwoPhotonState(0.0)) == pytest.approx(0.25, abs=1e-15)


def test_state_validation():
    with pytest.raises(ValueError):
        TwoPhotonState(1.5)
    with pytest.raises(TypeError):
        TwoPhotonState(0.5, crystal_axis=(1, 0, 0))


def test_density_matrix_is_a_state():
    for gamma in (0.0, 0.3, 1.0):
        rho = density_matrix(TwoPhotonState(gamma))
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.allclose(rho, rho.conj().T)
        assert np.linalg.eigvalsh(rho).min() > -1e-12


@given(stokes(), stokes(), st.floats(0, 1), stokes())
def test_closed_form_matches_density_matrix(a, b, gamma, c):
    state = TwoPhotonState(gamma, c)
    for pair in DetectorPair:
        assert coincidence_probability(a, b, state, pair) == pytest.approx(
            projection_probability(a, b, state, pair), abs=1e-10
        )


@given(stokes(), stokes(), st.floats(0, 1))
def test_pairs_sum_to_one(a, b, gamma):
    state = TwoPhotonState(gamma)
    assert sum(coincidence_probability(a, b, state, p) for p in DetectorPair) == pytest.approx(1.0, abs=1e-12)


@given(stokes(), stokes())
def test_singlet_law_depends_only_on_angle(a, b):
    assert coincidence_probability(a, b, SINGLET) == pytest.approx(0.25 * (1 - a.dot(b)), abs=1e-12)


@given(stokes(), stokes(), st.floats(0, 1))
def test_fast_path_agrees(a, b, gamma):
    state = TwoPhotonState(gamma)
    c = state.crystal_axis.as_array()
    for pair in DetectorPair:
        slow = coincidence_probability(a, b, state, pair)
        fast = coincidence_probability_fast(a.as_array(), b.as_array(), gamma, c, pair.anti)
        assert fast == pytest.approx(slow, abs=1e-15)


def test_mean_rate_examples():
    m = CoincidenceModel(r_p=800, r_a=60)
    assert mean_coincidence_rate(0.0, m) == 60
    assert mean_coincidence_rate(0.5, m) == 1660
    assert mean_coincidence_rate(0.25, CoincidenceModel(r_p=800, r_a=0)) == 800
    with pytest.raises(ValueError):
        mean_coincidence_rate(0.7, m)


def test_model_validation():
    with pytest.raises(ValueError):
        CoincidenceModel(r_p=-1)
    with pytest.raises(ValueError):
        CoincidenceModel(T=0)


def test_background_sample_mean(rng):
    m = CoincidenceModel(r_p=800, r_a=60, T=5)
    draws = np.array([sample_coincidences(0.0, m, rng) for _ in range(100_000)])
    assert abs(draws.mean() - 300) < 3 * math.sqrt(300 / draws.size)


def test_zero_rates_give_zero(rng):
    m = CoincidenceModel(r_p=0, r_a=0)
    assert all(sample_coincidences(0.3, m, rng) == 0 for _ in range(100))


def test_poisson_dispersion(rng):
    m = CoincidenceModel(r_p=800, r_a=60, T=5)
    draws = rng.poisson(mean_coincidence_rate(0.5, m) * m.T, size=100_000)
    assert mean_coincidence_rate(0.5, m) * m.T == 8300
    ratio = draws.var() / draws.mean()
    assert 0.97 <= ratio <= 1.03
    single = np.array([sample_coincidences(0.5, m, rng) for _ in range(20_000)])
    assert 0.95 <= single.var() / single.mean() <= 1.05


def test_singles(rng):
    m = CoincidenceModel(r_singles_a=0, r_singles_b=2000, T=5)
    counts = np.array([sample_singles(m, rng) for _ in range(10_000)])
    assert (counts[:, 0] == 0).all()
    assert abs(counts[:, 1].mean() - 10_000) < 3 * math.sqrt(10_000 / 10_000)


def test_uniform_basis_is_uniform(rng):
    pts = np.array([sample_uniform_basis(rng).as_array() for _ in range(100_000)])
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert np.linalg.norm(pts.mean(axis=0)) < 0.02
    octant = (pts > 0) @ np.array([1, 2, 4])
    frac = np.bincount(octant, minlength=8) / len(pts)
    assert np.all(np.abs(frac - 0.125) < 0.01)
