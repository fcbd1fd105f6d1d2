"""Two-photon polarization state and its coincidence statistics.

The entangled source emits the singlet ``(|x y> - |y x>)/sqrt(2)`` after
post-selection on one photon per observer. A temporal delay between the
signal and idler photons makes them distinguishable; this is modelled by an
indistinguishability weight ``gamma`` that mixes the singlet with the
classical state ``1/2 (|x y><x y| + |y x><y x|)``, where ``x`` is the crystal
axis of the source.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .polarization import StokesVector, stokes_to_jones

S1 = StokesVector(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class TwoPhotonState:
    """``gamma = 1`` is the singlet; ``gamma = 0`` the distinguishable mixture."""

    gamma: float = 1.0
    crystal_axis: StokesVector = S1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not isinstance(self.crystal_axis, StokesVector):
            raise TypeError("crystal_axis must be a StokesVector")


@dataclass(frozen=True)
class CoincidenceModel:
    """Count rates (per second) and the integration period ``T`` (seconds).

    ``r_p`` scales the pair coincidences: the mean rate is
    ``r_p (1 - cos theta) + r_a`` for the minimized detector pair.
    """

    r_p: float = 800.0
    r_a: float = 60.0
    r_singles_a: float = 1e5
    r_singles_b: float = 1e5
    T: float = 5.0

    def __post_init__(self):
        for name in ("r_p", "r_a", "r_singles_a", "r_singles_b"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if not self.T > 0.0:
            raise ValueError(f"integration period T must be positive, got {self.T}")


class DetectorPair(enum.Enum):
    """Which PBS outputs (Alice's, Bob's) are counted in coincidence."""

    HH = ("h", "h")
    HV = ("h", "v")
    VH = ("v", "h")
    VV = ("v", "v")

    @property
    def anti(self) -> bool:
        """True when the two observers' outputs differ (HV, VH)."""
        return self.value[0] != self.value[1]


def _probability(dot_ab, a_c, b_c, gamma, anti):
    corr = gamma * dot_ab + (1.0 - gamma) * a_c * b_c
    return 0.25 * (1.0 + corr) if anti else 0.25 * (1.0 - corr)


def coincidence_probability(
    a: StokesVector,
    b: StokesVector,
    state: TwoPhotonState,
    pair: DetectorPair = DetectorPair.HH,
) -> float:
    """Joint detection probability for one post-selected pair.

    Parameters
    ----------
    a, b : StokesVector
        Alice's and Bob's h-output measurement bases.
    state : TwoPhotonState
    pair : DetectorPair
        Detector combination. ``v`` outputs project onto the antipode of the
        corresponding basis.

    Returns
    -------
    float
        ``1/4 (1 -+ [gamma a.b + (1 - gamma)(a.c)(b.c)])``, in ``[0, 1/2]``.
    """
    c = state.crystal_axis
    p = _probability(a.dot(b), a.dot(c), b.dot(c), state.gamma, pair.anti)
    return min(max(p, 0.0), 0.5)


def coincidence_probability_fast(a, b, gamma, c, anti=False) -> float:
    """Array-level variant of :func:`coincidence_probability` for hot loops.

    ``a``, ``b`` and ``c`` are length-3 sequences of floats.
    """
    dot_ab = a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    a_c = a[0] * c[0] + a[1] * c[1] + a[2] * c[2]
    b_c = b[0] * c[0] + b[1] * c[1] + b[2] * c[2]
    return min(max(_probability(dot_ab, a_c, b_c, gamma, anti), 0.0), 0.5)


def mean_coincidence_rate(p: float, model: CoincidenceModel) -> float:
    """Mean coincidence rate ``4 r_p p + r_a`` in counts per second."""
    if not 0.0 <= p <= 0.5 + 1e-12:
        raise ValueError(f"coincidence probability must lie in [0, 1/2], got {p}")
    return 4.0 * model.r_p * p + model.r_a


def sample_coincidences(p: float, model: CoincidenceModel, rng: np.random.Generator) -> int:
    """One Poisson-distributed coincidence count over an integration period."""
    return int(rng.poisson(mean_coincidence_rate(p, model) * model.T))


def sample_singles(model: CoincidenceModel, rng: np.random.Generator) -> tuple[int, int]:
    """Independent singles counts for Alice and Bob.

    The singles carry no polarization information, so nothing here depends on
    either measurement basis.
    """
    count_a = int(rng.poisson(model.r_singles_a * model.T))
    count_b = int(rng.poisson(model.r_singles_b * model.T))
    return count_a, count_b


# -- brute-force oracle -------------------------------------------------------


def _basis_pair(stokes):
    j = stokes_to_jones(stokes)
    return j.as_array(), j.orthogonal().as_array()


def density_matrix(state: TwoPhotonState) -> np.ndarray:
    """4x4 two-photon density matrix in the (Alice ⊗ Bob) x/y product basis."""
    x, y = _basis_pair(state.crystal_axis)
    singlet = (np.kron(x, y) - np.kron(y, x)) / np.sqrt(2.0)
    xy = np.kron(x, y)
    yx = np.kron(y, x)
    mixed = 0.5 * (np.outer(xy, xy.conj()) + np.outer(yx, yx.conj()))
    return state.gamma * np.outer(singlet, singlet.conj()) + (1.0 - state.gamma) * mixed


def projection_probability(
    a: StokesVector,
    b: StokesVector,
    state: TwoPhotonState,
    pair: DetectorPair = DetectorPair.HH,
) -> float:
    """Direct projective evaluation ``<e_a e_b| rho |e_a e_b>``.

    Independent of the closed form in :func:`coincidence_probability`; used
    to validate it.
    """
    ha, va = _basis_pair(a)
    hb, vb = _basis_pair(b)
    ea = ha if pair.value[0] == "h" else va
    eb = hb if pair.value[1] == "h" else vb
    proj = np.kron(ea, eb)
    rho = density_matrix(state)
    return float(np.real(proj.conj() @ rho @ proj))
