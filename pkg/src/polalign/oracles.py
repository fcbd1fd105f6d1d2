"""Self-checks comparing closed forms against independent computations.

Each check returns ``(name, max_abs_error, tolerance, passed)``.
"""

from __future__ import annotations

import numpy as np

from .experiments import sample_uniform_basis
from .photon_pair import (
    DetectorPair,
    TwoPhotonState,
    coincidence_probability,
    projection_probability,
)
from .polarization import JonesVector, jones_overlap, jones_to_stokes, stokes_to_jones

IDENTITY_TOL = 1e-10
LAW_TOL = 1e-12
ORACLE_TOL = 1e-10


def random_jones(rng: np.random.Generator) -> JonesVector:
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    return JonesVector.normalized(z[0], z[1])


def _result(name, errors, tol):
    err = float(np.max(errors)) if len(errors) else 0.0
    return name, err, tol, bool(err <= tol)


def overlap_bridge(rng, n=10_000):
    """``|a* . b|^2 == (1 + a.b)/2`` for random Jones pairs."""
    errs = np.empty(n)
    for i in range(n):
        ja, jb = random_jones(rng), random_jones(rng)
        sa, sb = jones_to_stokes(ja), jones_to_stokes(jb)
        errs[i] = abs(jones_overlap(ja, jb) - 0.5 * (1.0 + sa.dot(sb)))
    return _result("overlap_bridge", errs, IDENTITY_TOL)


def round_trip(rng, n=10_000):
    """Stokes -> Jones -> Stokes, and Jones -> Stokes -> Jones up to global phase."""
    errs = np.empty(n)
    for i in range(n):
        j = random_jones(rng)
        s = jones_to_stokes(j)
        back = stokes_to_jones(s)
        s2 = jones_to_stokes(back)
        errs[i] = max(
            abs(1.0 - jones_overlap(j, back)),
            float(np.max(np.abs(s.as_array() - s2.as_array()))),
        )
    return _result("round_trip", errs, IDENTITY_TOL)


def singlet_law(rng, n=10_000):
    """Singlet (h, h) probability is ``(1 - cos theta)/4``; the four pairs sum to 1."""
    state = TwoPhotonState(gamma=1.0)
    errs = np.empty(n)
    for i in range(n):
        a, b = sample_uniform_basis(rng), sample_uniform_basis(rng)
        p = coincidence_probability(a, b, state)
        total = sum(coincidence_probability(a, b, state, pair) for pair in DetectorPair)
        errs[i] = max(abs(p - 0.25 * (1.0 - a.dot(b))), abs(total - 1.0))
    return _result("singlet_law", errs, LAW_TOL)


def decoherence_oracle(rng, n=1_000):
    """gamma = 0 closed form against the 4x4 density-matrix projection."""
    state = TwoPhotonState(gamma=0.0)
    errs = np.empty(n)
    for i in range(n):
        a, b = sample_uniform_basis(rng), sample_uniform_basis(rng)
        errs[i] = max(
            abs(coincidence_probability(a, b, state, pair) - projection_probability(a, b, state, pair))
            for pair in DetectorPair
        )
    return _result("decoherence_oracle", errs, ORACLE_TOL)


def run_all(seed: int = 0):
    rng = np.random.default_rng([seed, 11])
    return [overlap_bridge(rng), round_trip(rng), singlet_law(rng), decoherence_oracle(rng)]
