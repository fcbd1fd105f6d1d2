import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polalign.hardware import (
    ActuatorSpec,
    DriftProcess,
    RandomWalk,
    SawtoothGreatCircle,
    Static,
    VoltageOutOfRange,
    actuator_transform,
    basis_vector,
    channel_transform,
    effective_basis,
    retarder_transform,
)
from polalign.polarization import (
    JonesVector,
    PolarizationTransform,
    StokesVector,
    angle_between,
    apply_transform,
    jones_to_stokes,
    rotation_matrix,
)

I2 = PolarizationTransform.identity()
SPEC = ActuatorSpec.uniform(3)


def rodrigues(axis, angle):
    """Right-handed rotation matrix about a unit axis."""
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * k @ k


def stokes_after(u, s):
    from polalign.polarization import stokes_to_jones

    return jones_to_stokes(apply_transform(u, stokes_to_jones(s))).as_array()


def test_retarder_examples():
    assert np.allclose(retarder_transform(0, 0).matrix, np.eye(2))
    out = stokes_after(retarder_transform(0, math.pi), StokesVector(0, 1, 0))
    assert np.allclose(out, [0, -1, 0], atol=1e-12)
    out = stokes_after(retarder_transform(45, math.pi / 2), StokesVector(1, 0, 0))
    assert np.allclose(out, [0, 0, -1], atol=1e-12)


@given(st.sampled_from([0.0, 45.0, 22.5, 10.0]), st.floats(-7, 7))
def test_retarder_is_right_handed_rotation(angle, delta):
    two = math.radians(2 * angle)
    axis = np.array([math.cos(two), math.sin(two), 0.0])
    r = rotation_matrix(retarder_transform(angle, delta))
    assert np.allclose(r, rodrigues(axis, delta), atol=1e-12)


def test_actuator_examples():
    assert np.allclose(actuator_transform(SPEC, [0, 0, 0]).matrix, np.eye(2))
    assert np.allclose(actuator_transform(SPEC, [1, 0, 0]).matrix, retarder_transform(0, math.pi).matrix)
    with pytest.raises(VoltageOutOfRange):
        actuator_transform(SPEC, [2.5, 0, 0])
    with pytest.raises(ValueError):
        actuator_transform(SPEC, [0, 0])


def test_stage_order():
    v = [0.3, 0.7, 1.1]
    expected = (
        retarder_transform(0, math.pi * 1.1).matrix
        @ retarder_transform(45, math.pi * 0.7).matrix
        @ retarder_transform(0, math.pi * 0.3).matrix
    )
    assert np.allclose(actuator_transform(SPEC, v).matrix, expected)


def test_spec_validation():
    with pytest.raises(ValueError):
        ActuatorSpec(stages=((0, 1), (0, 1), (0, 1)))
    with pytest.raises(ValueError):
        ActuatorSpec(stages=((0, 1), (45, 1)))
    with pytest.raises(ValueError):
        ActuatorSpec(stages=((0, 1), (45, -1), (0, 1)))
    spec = ActuatorSpec.uniform(4, v_pi=2.0)
    assert spec.n_stages == 4 and spec.v_pi == 2.0
    assert np.allclose(spec.upper, 4.0)


def test_effective_basis_examples():
    assert np.allclose(effective_basis(I2, I2).as_array(), [1, 0, 0])
    b = effective_basis(I2, retarder_transform(45, math.pi))
    assert np.allclose(b.as_array(), [-1, 0, 0], atol=1e-12)


@given(st.floats(0, 2 * math.pi), st.lists(st.floats(0, 2), min_size=3, max_size=3))
def test_global_phase_invariance(phi, v):
    ph = PolarizationTransform(np.exp(1j * phi) * np.eye(2))
    act = actuator_transform(SPEC, v)
    chan = retarder_transform(30, 1.2)
    a = effective_basis(chan, act).as_array()
    b = effective_basis(ph @ chan, ph @ act).as_array()
    assert np.allclose(a, b, atol=1e-12)


@given(
    st.lists(st.floats(0, 2), min_size=4, max_size=4),
    st.floats(0, 90),
    st.floats(-4, 4),
    st.sampled_from([(1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.6, 0.0, 0.8)]),
)
def test_fast_basis_matches_jones_path(v, ang, delta, pbs):
    from polalign.polarization import stokes_to_jones

    spec = ActuatorSpec.uniform(4)
    chan = retarder_transform(ang, delta)
    pbs_s = StokesVector(*pbs)
    slow = effective_basis(chan, actuator_transform(spec, v), stokes_to_jones(pbs_s)).as_array()
    fast = basis_vector(spec, v, rotation_matrix(chan), pbs)
    assert np.allclose(slow, fast, atol=1e-12)


def test_actuator_covers_sphere(rng):
    """Every target is reached from x-polarization by some v in [0, 2 v_pi]^3."""
    x = JonesVector(1, 0)
    for _ in range(1000):
        t = rng.normal(size=3)
        t /= np.linalg.norm(t)
        # stage 2 sets the polar angle from S1, stage 3 the azimuth about S1
        d2 = math.acos(np.clip(t[0], -1, 1))
        d3 = math.atan2(t[1], -t[2]) % (2 * math.pi)
        v = [0.0, d2 / math.pi, d3 / math.pi]
        out = jones_to_stokes(apply_transform(actuator_transform(SPEC, v), x))
        assert angle_between(out, StokesVector.from_array(t)) < math.radians(0.5)


def test_static_drift():
    assert np.allclose(channel_transform(Static(I2), 123.0).matrix, np.eye(2))
    target = StokesVector(0, 0.6, 0.8)
    proc = DriftProcess(Static.from_basis(target))
    assert np.allclose(proc.basis(10.0).as_array(), target.as_array(), atol=1e-12)


def test_sawtooth_rate():
    proc = DriftProcess(SawtoothGreatCircle(rate_deg_per_hour=176.1))
    swept = math.degrees(angle_between(proc.basis(0.0), proc.basis(3600.0)))
    assert swept == pytest.approx(176.1, abs=0.1)


def test_sawtooth_stays_on_great_circle():
    drift = SawtoothGreatCircle(axis_setup=(0.3, 0.7, 0.2))
    proc = DriftProcess(drift)
    pts = np.array([proc.basis(t).as_array() for t in np.linspace(0, 7200, 50)])
    normal = np.cross(pts[1], pts[5])
    normal /= np.linalg.norm(normal)
    assert np.allclose(pts @ normal, 0, atol=1e-10)


def test_walk_validation():
    with pytest.raises(ValueError):
        RandomWalk(step_scale=-1)
    with pytest.raises(ValueError):
        RandomWalk(dt=0)
    proc = DriftProcess(RandomWalk(), np.random.default_rng(0))
    proc.at(100.0)
    with pytest.raises(ValueError):
        proc.at(50.0)


def test_walk_start_and_seed():
    start = StokesVector(0, 0, 1)
    walk = RandomWalk(start=start)
    assert np.allclose(DriftProcess(walk, np.random.default_rng(1)).basis(0).as_array(), [0, 0, 1])
    a = channel_transform(walk, 3600, np.random.default_rng(5)).matrix
    b = channel_transform(walk, 3600, np.random.default_rng(5)).matrix
    assert np.array_equal(a, b)


def test_walk_mean_drift_matches_configuration():
    horizon = 4.0
    walk = RandomWalk.from_mean_drift(0.1, horizon, dt=120.0)
    assert walk.step_scale == pytest.approx(0.2257, abs=1e-4)
    disp = []
    for seed in range(1000):
        proc = DriftProcess(walk, np.random.default_rng(seed))
        disp.append(math.degrees(angle_between(proc.basis(0), proc.basis(horizon * 3600))))
    disp = np.array(disp)
    se = disp.std(ddof=1) / math.sqrt(disp.size)
    assert abs(disp.mean() - 0.4) < 4 * se
