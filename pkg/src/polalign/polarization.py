"""Jones and Stokes calculus for pure polarization states.

Conventions used throughout the package:

* x-polarization maps to the +S1 pole of the Poincare sphere.
* Right-circular ``(1, i)/sqrt(2)`` maps to +S3.
* Jones vectors returned by :func:`stokes_to_jones` have a real, non-negative
  x amplitude; the state ``-S1`` is pinned to ``(0, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-6
UNITARY_TOL = 1e-10

# Pauli matrices ordered to match the Stokes components (s1, s2, s3).
PAULI = np.array(
    [
        [[1, 0], [0, -1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class JonesVector:
    """Normalized complex 2-vector ``(ax, ay)``.

    Inputs within ``NORM_TOL`` of unit norm are renormalized; anything
    further away is rejected.
    """

    ax: complex
    ay: complex

    def __post_init__(self):
        ax, ay = complex(self.ax), complex(self.ay)
        norm = np.sqrt(abs(ax) ** 2 + abs(ay) ** 2)
        if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"Jones vector is not normalized (norm={norm!r})")
        object.__setattr__(self, "ax", ax / norm)
        object.__setattr__(self, "ay", ay / norm)

    @classmethod
    def from_array(cls, arr) -> "JonesVector":
        arr = np.asarray(arr, dtype=complex)
        return cls(arr[0], arr[1])

    @classmethod
    def normalized(cls, ax, ay) -> "JonesVector":
        """Build a Jones vector from arbitrary nonzero amplitudes."""
        norm = np.sqrt(abs(ax) ** 2 + abs(ay) ** 2)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(ax / norm, ay / norm)

    def as_array(self) -> np.ndarray:
        return np.array([self.ax, self.ay], dtype=complex)

    def orthogonal(self) -> "JonesVector":
        """The state antipodal on the sphere (second column of the basis matrix)."""
        return JonesVector(-self.ay.conjugate(), self.ax.conjugate())


@dataclass(frozen=True)
class StokesVector:
    """Unit 3-vector on the Poincare sphere."""

    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        s = np.array([self.s1, self.s2, self.s3], dtype=float)
        norm = float(np.linalg.norm(s))
        if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"Stokes vector is not on the unit sphere (norm={norm!r})")
        s /= norm
        object.__setattr__(self, "s1", float(s[0]))
        object.__setattr__(self, "s2", float(s[1]))
        object.__setattr__(self, "s3", float(s[2]))

    @classmethod
    def from_array(cls, arr) -> "StokesVector":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], arr[1], arr[2])

    @classmethod
    def normalized(cls, s1, s2, s3) -> "StokesVector":
        norm = float(np.sqrt(s1 * s1 + s2 * s2 + s3 * s3))
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(s1 / norm, s2 / norm, s3 / norm)

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])

    def dot(self, other: "StokesVector") -> float:
        return self.s1 * other.s1 + self.s2 * other.s2 + self.s3 * other.s3

    def __neg__(self) -> "StokesVector":
        return StokesVector(-self.s1, -self.s2, -self.s3)


class PolarizationTransform:
    """Unitary 2x2 Jones matrix of a lossless polarization element.

    Matrices are immutable once built; ``matrix`` returns a read-only view.
    """

    __slots__ = ("_m",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"Jones matrix must be 2x2, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=NORM_TOL):
            raise ValueError("Jones matrix is not unitary")
        m.setflags(write=False)
        self._m = m

    @classmethod
    def identity(cls) -> "PolarizationTransform":
        return cls(np.eye(2))

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __matmul__(self, other: "PolarizationTransform") -> "PolarizationTransform":
        return PolarizationTransform(self._m @ other._m)

    @property
    def H(self) -> "PolarizationTransform":
        """Hermitian conjugate (the inverse transform)."""
        return PolarizationTransform(self._m.conj().T)

    def __repr__(self):
        return f"PolarizationTransform({self._m.tolist()!r})"


def jones_to_stokes(j: JonesVector) -> StokesVector:
    """Map a Jones vector to its point on the Poincare sphere.

    Parameters
    ----------
    j : JonesVector
        normalized polarization state

    Returns
    -------
    StokesVector
        ``(|ax|^2 - |ay|^2, 2 Re(ax ay*), -2 Im(ax ay*))``
    """
    ax, ay = j.ax, j.ay
    cross = ax * ay.conjugate()
    s1 = abs(ax) ** 2 - abs(ay) ** 2
    s2 = 2.0 * cross.real
    # i (ax ay* - ax* ay) = i * 2i Im(ax ay*)
    s3 = -2.0 * cross.imag
    return StokesVector.normalized(s1, s2, s3)


def stokes_to_jones(s: StokesVector) -> JonesVector:
    """Inverse of :func:`jones_to_stokes`, with ``ax`` real and non-negative."""
    ax = np.sqrt(max(0.0, (1.0 + s.s1) / 2.0))
    if ax == 0.0:
        return JonesVector(0.0, 1.0)
    # with ax real: s2 + i s3 = 2 ax ay
    ay = complex(s.s2, s.s3) / (2.0 * ax)
    return JonesVector.normalized(ax, ay)


def transform_from_basis(j: JonesVector) -> PolarizationTransform:
    """Unitary whose first column is ``j``: ``[[ax, -ay*], [ay, ax*]]``."""
    ax, ay = j.ax, j.ay
    return PolarizationTransform([[ax, -ay.conjugate()], [ay, ax.conjugate()]])


def apply_transform(u: PolarizationTransform, j: JonesVector) -> JonesVector:
    out = u.matrix @ j.as_array()
    return JonesVector.normalized(out[0], out[1])


def angle_between(a: StokesVector, b: StokesVector) -> float:
    """Angle in radians between two points on the Poincare sphere."""
    return float(np.arccos(np.clip(a.dot(b), -1.0, 1.0)))


def jones_overlap(a: JonesVector, b: JonesVector) -> float:
    """Squared modulus of the Hermitian inner product ``|a* . b|^2``."""
    return abs(a.ax.conjugate() * b.ax + a.ay.conjugate() * b.ay) ** 2


def rotation_matrix(u: PolarizationTransform) -> np.ndarray:
    """3x3 rotation induced on Stokes space by a Jones matrix.

    ``R[i, k] = 1/2 tr(sigma_i U sigma_k U^dagger)``, so that
    ``jones_to_stokes(U j) == R @ jones_to_stokes(j)``.
    """
    m = u.matrix
    md = m.conj().T
    r = np.empty((3, 3))
    for i in range(3):
        for k in range(3):
            r[i, k] = 0.5 * np.trace(PAULI[i] @ m @ PAULI[k] @ md).real
    return r


def is_unitary(u: PolarizationTransform, tol: float = UNITARY_TOL) -> bool:
    m = u.matrix
    return bool(
        np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=tol)
        and abs(abs(np.linalg.det(m)) - 1.0) <= tol
    )
