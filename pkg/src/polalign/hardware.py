"""Actuator and fiber-channel models.

Light travels source -> channel -> actuator -> PBS. A measurement basis is the
input state that the PBS would send entirely to its h output, found by
back-propagating the PBS h axis through the actuator and then the channel.

Each actuator stage is a linear retarder whose retardance is proportional to
the applied voltage (``pi * v / v_pi``). On the Poincare sphere a stage at
0 degrees rotates about S1 and a stage at 45 degrees rotates about S2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .polarization import (
    JonesVector,
    PolarizationTransform,
    StokesVector,
    apply_transform,
    jones_to_stokes,
    rotation_matrix,
    stokes_to_jones,
    transform_from_basis,
)

PBS_H = JonesVector(1.0, 0.0)
_SECONDS_PER_HOUR = 3600.0


class VoltageOutOfRange(ValueError):
    """A voltage vector falls outside the actuator limits."""


@dataclass(frozen=True)
class ActuatorSpec:
    """Ordered stages of a piezoelectric squeezer.

    ``stages`` holds ``(axis_angle_deg, v_pi)`` pairs in the order light
    passes through them. ``voltage_limits`` apply to every stage.
    """

    stages: tuple = ((0.0, 1.0), (45.0, 1.0), (0.0, 1.0))
    voltage_limits: tuple = (0.0, 2.0)

    def __post_init__(self):
        stages = tuple((float(a), float(vpi)) for a, vpi in self.stages)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "voltage_limits", tuple(map(float, self.voltage_limits)))
        if len(stages) not in (3, 4):
            raise ValueError(f"actuator needs 3 or 4 stages, got {len(stages)}")
        for k, (axis, vpi) in enumerate(stages):
            if axis != (0.0 if k % 2 == 0 else 45.0):
                raise ValueError("stage axes must alternate 0, 45, 0[, 45] degrees")
            if not vpi > 0:
                raise ValueError(f"stage {k} has non-positive v_pi={vpi}")
        lo, hi = self.voltage_limits
        if not lo < hi:
            raise ValueError(f"invalid voltage limits {self.voltage_limits}")

    @classmethod
    def uniform(cls, n_stages: int = 3, v_pi: float = 1.0, limits=None) -> "ActuatorSpec":
        """Stages with a common half-wave voltage and limits ``[0, 2 v_pi]``."""
        stages = tuple((0.0 if k % 2 == 0 else 45.0, v_pi) for k in range(n_stages))
        return cls(stages, limits if limits is not None else (0.0, 2.0 * v_pi))

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def v_pi(self) -> float:
        """Half-wave voltage of the first stage (the common one by default)."""
        return self.stages[0][1]

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.n_stages, self.voltage_limits[0])

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.n_stages, self.voltage_limits[1])


def check_voltages(spec: ActuatorSpec, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.n_stages,):
        raise ValueError(f"expected {spec.n_stages} voltages, got shape {v.shape}")
    lo, hi = spec.voltage_limits
    if np.any(v < lo) or np.any(v > hi) or not np.all(np.isfinite(v)):
        raise VoltageOutOfRange(f"voltages {v.tolist()} outside limits [{lo}, {hi}]")
    return v


def retarder_transform(axis_angle: float, retardance: float) -> PolarizationTransform:
    """Linear retarder with its fast axis at ``axis_angle`` degrees.

    ``exp(-i delta/2 (cos 2t sigma_1 + sin 2t sigma_2))``, a right-handed
    rotation of the Stokes vector by ``delta`` about the equatorial axis at
    ``2t``.
    """
    two_theta = math.radians(2.0 * axis_angle)
    n1, n2 = math.cos(two_theta), math.sin(two_theta)
    c, s = math.cos(retardance / 2.0), math.sin(retardance / 2.0)
    return PolarizationTransform(
        [
            [c - 1j * s * n1, -1j * s * n2],
            [-1j * s * n2, c + 1j * s * n1],
        ]
    )


def actuator_transform(spec: ActuatorSpec, v) -> PolarizationTransform:
    """Jones matrix of the whole actuator; stage 1 acts first (rightmost)."""
    v = check_voltages(spec, v)
    m = np.eye(2, dtype=complex)
    for (axis, vpi), volt in zip(spec.stages, v):
        m = retarder_transform(axis, math.pi * volt / vpi).matrix @ m
    return PolarizationTransform(m)


def effective_basis(
    channel: PolarizationTransform,
    actuator: PolarizationTransform,
    pbs_h_axis: JonesVector = PBS_H,
) -> StokesVector:
    """Stokes vector of the state routed entirely to the PBS h output.

    The h axis is propagated backwards through the actuator, then the
    channel: ``channel^dagger actuator^dagger h``.
    """
    back = channel.H @ actuator.H
    return jones_to_stokes(apply_transform(back, pbs_h_axis))


def basis_vector(spec: ActuatorSpec, v, channel_rotation=None, pbs=(1.0, 0.0, 0.0)) -> np.ndarray:
    """Fast Stokes-space equivalent of ``effective_basis`` for a bare PBS.

    Rotates S1 backwards through each stage with plain float arithmetic.
    ``channel_rotation`` is the 3x3 Stokes rotation of the channel (see
    :func:`polalign.polarization.rotation_matrix`), or None for identity.
    ``pbs`` is the Stokes vector of the PBS h axis in the actuator frame.
    No range checking; callers are expected to have clamped ``v``.
    """
    x, y, z = pbs
    for k in range(len(spec.stages) - 1, -1, -1):
        axis, vpi = spec.stages[k]
        d = -math.pi * v[k] / vpi
        c, s = math.cos(d), math.sin(d)
        if axis == 0.0:
            y, z = c * y - s * z, s * y + c * z
        else:
            z, x = c * z - s * x, s * z + c * x
    if channel_rotation is None:
        return np.array([x, y, z])
    return channel_rotation.T @ np.array([x, y, z])


# -- drift models --------------------------------------------------------------


@dataclass(frozen=True)
class Static:
    u: PolarizationTransform

    @classmethod
    def from_basis(cls, target: StokesVector) -> "Static":
        """Channel whose effective basis (with no actuator) is ``target``."""
        return cls(transform_from_basis(stokes_to_jones(target)).H)


@dataclass(frozen=True)
class SawtoothGreatCircle:
    """Fourth stage of a 4-stage actuator driven by a voltage sawtooth.

    The first three stages hold ``axis_setup``; the fourth ramps from 0 to
    ``amplitude * v_pi`` at ``rate_deg_per_hour`` of basis rotation and then
    resets. Since the fourth stage sits next to the PBS and rotates about S2,
    which is orthogonal to the PBS axis S1, the basis traces a great circle.
    """

    axis_setup: tuple = (0.0, 0.0, 0.0)
    rate_deg_per_hour: float = 176.1
    amplitude: float = 1.0
    actuator: ActuatorSpec = ActuatorSpec.uniform(4)

    def __post_init__(self):
        if self.actuator.n_stages != 4:
            raise ValueError("sawtooth drift needs a 4-stage actuator")
        if len(self.axis_setup) != 3:
            raise ValueError("axis_setup holds the three fixed stage voltages")
        if self.rate_deg_per_hour < 0:
            raise ValueError("drift rate must be non-negative")
        if not 0 < self.amplitude:
            raise ValueError("sawtooth amplitude must be positive")

    def sweep_angle_deg(self, t: float) -> float:
        """Great-circle angle (degrees) at time ``t`` seconds, before wrapping."""
        return self.rate_deg_per_hour * t / _SECONDS_PER_HOUR

    def voltages(self, t: float) -> np.ndarray:
        v_pi = self.actuator.stages[3][1]
        span = 180.0 * self.amplitude
        frac = (self.sweep_angle_deg(t) % span) / span
        return np.array([*self.axis_setup, frac * self.amplitude * v_pi], dtype=float)


@dataclass(frozen=True)
class RandomWalk:
    """Isotropic random rotation walk of the channel.

    Every ``dt`` seconds the channel picks up a rotation about a uniformly
    random axis by a normally distributed angle. The angle scale is chosen so
    that the RMS displacement of a basis vector is ``step_scale * sqrt(t)``
    (degrees, t in hours). ``start`` is the basis at ``t = 0``.
    """

    step_scale: float = 0.2257
    dt: float = 20.0
    start: StokesVector = StokesVector(1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.step_scale < 0:
            raise ValueError("step_scale must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @classmethod
    def from_mean_drift(cls, rate_deg_per_hour: float, horizon_hours: float, **kw) -> "RandomWalk":
        """Walk whose expected displacement after ``horizon_hours`` is ``rate * horizon``.

        For small steps the displacement is a 2-D Gaussian walk on the sphere's
        tangent plane, so ``E|d| = sqrt(pi)/2 * step_scale * sqrt(t)``.
        """
        mean_disp = rate_deg_per_hour * horizon_hours
        step_scale = mean_disp / (math.sqrt(math.pi) / 2.0 * math.sqrt(horizon_hours))
        return cls(step_scale=step_scale, **kw)

    @property
    def step_sigma(self) -> float:
        """Standard deviation (radians) of one rotation step."""
        # a rotation by phi about a random axis displaces a point by
        # phi*sin(angle to axis), with E[sin^2] = 2/3
        dt_hours = self.dt / _SECONDS_PER_HOUR
        return math.radians(self.step_scale) * math.sqrt(1.5 * dt_hours)


DriftModel = Union[Static, SawtoothGreatCircle, RandomWalk]


def _random_rotation_step(sigma: float, rng: np.random.Generator) -> np.ndarray:
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    phi = rng.normal(0.0, sigma)
    c, s = math.cos(phi / 2.0), math.sin(phi / 2.0)
    return np.array(
        [
            [c - 1j * s * n[0], -1j * s * (n[1] - 1j * n[2])],
            [-1j * s * (n[1] + 1j * n[2]), c + 1j * s * n[0]],
        ]
    )


class DriftProcess:
    """Stateful evaluation of a drift model along increasing times.

    Owns its random source; queries must be non-decreasing in time.
    """

    def __init__(self, drift: DriftModel, rng: np.random.Generator | None = None):
        self.drift = drift
        self.rng = rng if rng is not None else np.random.default_rng()
        self._steps = 0
        self._walk = np.eye(2, dtype=complex)
        self._t = 0.0
        if isinstance(drift, RandomWalk):
            self._origin = transform_from_basis(stokes_to_jones(drift.start)).matrix

    def at(self, t: float) -> PolarizationTransform:
        if t < 0:
            raise ValueError("time must be non-negative")
        drift = self.drift
        if isinstance(drift, Static):
            return drift.u
        if isinstance(drift, SawtoothGreatCircle):
            return actuator_transform(drift.actuator, drift.voltages(t))
        if isinstance(drift, RandomWalk):
            if t < self._t:
                raise ValueError("random-walk drift must be queried at non-decreasing times")
            self._t = t
            n_steps = int(math.floor(t / drift.dt + 1e-9))
            sigma = drift.step_sigma
            while self._steps < n_steps:
                self._walk = _random_rotation_step(sigma, self.rng) @ self._walk
                self._steps += 1
            # basis(t) = W(t) start, so the channel is (W B0)^dagger
            return PolarizationTransform((self._walk @ self._origin).conj().T)
        raise TypeError(f"unknown drift model {drift!r}")

    def basis(self, t: float) -> StokesVector:
        return effective_basis(self.at(t), PolarizationTransform.identity())


def channel_transform(drift: DriftModel, t: float, rng: np.random.Generator | None = None) -> PolarizationTransform:
    """Channel Jones matrix at time ``t`` seconds.

    For a random walk, the trajectory is generated from ``rng`` starting at
    time zero, so equal seeds give identical matrices.
    """
    return DriftProcess(drift, rng).at(t)


__all__ = [
    "PBS_H",
    "ActuatorSpec",
    "DriftModel",
    "DriftProcess",
    "RandomWalk",
    "SawtoothGreatCircle",
    "Static",
    "VoltageOutOfRange",
    "actuator_transform",
    "basis_vector",
    "channel_transform",
    "check_voltages",
    "effective_basis",
    "retarder_transform",
    "rotation_matrix",
]
