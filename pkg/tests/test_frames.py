import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viloop.frames import (
    EnginePose,
    InvalidRotation,
    RigidTransform,
    apply_offset,
    compose,
    euler_from_matrix,
    from_engine,
    initial_offset,
    inverse,
    matrix_from_euler,
    matrix_from_quat,
    quat_from_matrix,
    resume_offset,
    rot_z,
    to_engine,
    wrap_angle,
)

from conftest import mat4_close, random_rotation, random_transform, rt_as_mat4

I4 = np.eye(4)


def test_compose_identity():
    x = RigidTransform(rot_z(0.7), [1.0, 2.0, 3.0])
    assert compose(RigidTransform.identity(), x).almost_equal(x)
    assert compose(x, RigidTransform.identity()).almost_equal(x)


def test_compose_quarter_turn_pair():
    a = RigidTransform(rot_z(math.pi / 2), [1.0, 0.0, 0.0])
    b = RigidTransform(rot_z(-math.pi / 2), [0.0, 0.0, 0.0])
    out = compose(a, b)
    # 4x4 homogeneous-product oracle
    expected = rt_as_mat4(a) @ rt_as_mat4(b)
    assert mat4_close(rt_as_mat4(out), expected)
    assert np.abs(out.rotation - np.eye(3)).max() <= 1e-9
    assert np.abs(out.translation - [1.0, 0.0, 0.0]).max() <= 1e-9


def test_compose_matches_mat4_oracle(rng):
    for _ in range(500):
        a = random_transform(rng)
        b = random_transform(rng)
        assert mat4_close(rt_as_mat4(compose(a, b)), rt_as_mat4(a) @ rt_as_mat4(b))


def test_compose_associative(rng):
    for _ in range(200):
        a, b, c = (random_transform(rng) for _ in range(3))
        lhs = compose(compose(a, b), c)
        rhs = compose(a, compose(b, c))
        assert lhs.almost_equal(rhs, 1e-9)


def test_inverse_cases(rng):
    assert inverse(RigidTransform.identity()).almost_equal(RigidTransform.identity())
    t = RigidTransform(np.eye(3), [0.0, 0.0, 5.0])
    assert inverse(t).almost_equal(RigidTransform(np.eye(3), [0.0, 0.0, -5.0]))
    a = RigidTransform(rot_z(math.radians(30)), [2.0, 1.0, 0.0])
    assert mat4_close(rt_as_mat4(inverse(a)), np.linalg.inv(rt_as_mat4(a)))
    for _ in range(300):
        x = random_transform(rng)
        assert compose(x, inverse(x)).almost_equal(RigidTransform.identity(), 1e-9)
        assert mat4_close(rt_as_mat4(inverse(x)), np.linalg.inv(rt_as_mat4(x)), 1e-9)


def test_initial_offset_trivials():
    d0 = RigidTransform(rot_z(math.radians(90)), [10.0, 2.0, 0.0])
    assert initial_offset(d0, d0).almost_equal(RigidTransform.identity())
    assert initial_offset(d0, RigidTransform.identity()).almost_equal(d0)


def test_anchoring_identity(rng):
    for _ in range(500):
        d0 = random_transform(rng)
        p0 = random_transform(rng)
        off = initial_offset(d0, p0)
        assert apply_offset(off, p0).almost_equal(d0, 1e-9)


def test_apply_offset_quarter_turn_motion():
    # 90-degree yaw offset: physical +x motion becomes digital +y motion
    d0 = RigidTransform(rot_z(math.pi / 2), [0.0, 0.0, 0.0])
    p0 = RigidTransform.identity()
    off = initial_offset(d0, p0)
    p1 = RigidTransform(np.eye(3), [1.0, 0.0, 0.0])
    d1 = apply_offset(off, p1)
    expected = rt_as_mat4(off) @ rt_as_mat4(p1)
    assert mat4_close(rt_as_mat4(d1), expected)
    assert np.abs(d1.translation - [0.0, 1.0, 0.0]).max() <= 1e-9


def test_relative_motion_equivalence(rng):
    # the digital body-frame displacement equals the physical one
    for _ in range(300):
        off = random_transform(rng)
        pk = random_transform(rng)
        pk1 = random_transform(rng)
        dk = apply_offset(off, pk)
        dk1 = apply_offset(off, pk1)
        lhs = compose(inverse(dk), dk1)
        rhs = compose(inverse(pk), pk1)
        assert lhs.almost_equal(rhs, 1e-9)


def test_resume_offset_no_motion(rng):
    d0 = random_transform(rng)
    p0 = random_transform(rng)
    off = initial_offset(d0, p0)
    d_pause = apply_offset(off, p0)
    # physical unchanged during the pause: offset is reproduced
    off2 = resume_offset(d_pause, p0)
    assert off2.almost_equal(off, 1e-9)


def test_resume_offset_continuity_after_turn(rng):
    d_pause = random_transform(rng)
    p_resume = compose(random_transform(rng), RigidTransform(rot_z(math.pi), [2.0, 0.0, 0.0]))
    off = resume_offset(d_pause, p_resume)
    assert apply_offset(off, p_resume).almost_equal(d_pause, 1e-9)


def test_pause_resume_chains_zero_jump(rng):
    # randomized chains: poses interleaved with pause/resume; the digital
    # pose is continuous across every resume
    for _ in range(50):
        physical = random_transform(rng)
        offset = initial_offset(random_transform(rng), physical)
        digital = apply_offset(offset, physical)
        for _ in range(20):
            if rng.uniform() < 0.5:
                physical = random_transform(rng)
                digital = apply_offset(offset, physical)
            else:
                # pause: physical wanders; resume re-anchors
                physical = random_transform(rng)
                offset = resume_offset(digital, physical)
                resumed = apply_offset(offset, physical)
                assert resumed.almost_equal(digital, 1e-9)
                digital = resumed


def test_engine_round_trip_examples():
    assert np.abs(to_engine(RigidTransform.identity()).position).max() == 0.0
    e = to_engine(RigidTransform(np.eye(3), [1.5, 0.0, 0.0]))
    assert np.abs(e.position - [150.0, 0.0, 0.0]).max() <= 1e-9
    e = to_engine(RigidTransform(rot_z(math.radians(30)), [0.0, 0.0, 0.0]))
    assert abs(e.yaw - (-30.0)) <= 1e-9
    assert abs(e.roll) <= 1e-9 and abs(e.pitch) <= 1e-9


def test_engine_round_trip_random(rng):
    for _ in range(300):
        roll = rng.uniform(-math.pi, math.pi)
        pitch = rng.uniform(-math.radians(88.9), math.radians(88.9))
        yaw = rng.uniform(-math.pi, math.pi)
        t = RigidTransform(matrix_from_euler(roll, pitch, yaw), rng.uniform(-10, 10, 3))
        back = from_engine(to_engine(t))
        assert back.almost_equal(t, 1e-9)


def test_engine_pose_round_trip_units():
    e = EnginePose(position=np.array([150.0, -30.0, 12.0]), roll=10.0, pitch=-20.0, yaw=45.0)
    e2 = to_engine(from_engine(e))
    assert np.abs(e2.position - e.position).max() <= 1e-6
    for a, b in ((e2.roll, e.roll), (e2.pitch, e.pitch), (e2.yaw, e.yaw)):
        assert abs(a - b) <= 1e-6


def test_gimbal_branch_documented():
    rot = matrix_from_euler(0.3, math.pi / 2, 0.4)
    roll, pitch, yaw = euler_from_matrix(rot)
    assert roll == 0.0
    back = matrix_from_euler(roll, pitch, yaw)
    assert np.abs(back - rot).max() <= 1e-9


def test_quaternion_round_trip(rng):
    for _ in range(300):
        rot = random_rotation(rng)
        q = quat_from_matrix(rot)
        assert np.abs(matrix_from_quat(q) - rot).max() <= 1e-9
    q = quat_from_matrix(rot_z(math.pi / 2))
    assert np.abs(q - [0.0, 0.0, math.sqrt(0.5), math.sqrt(0.5)]).max() <= 1e-9


def test_rotation_repair_and_reject(rng):
    rot = random_rotation(rng)
    drifted = rot + rng.normal(scale=1e-5, size=(3, 3))
    repaired = RigidTransform(drifted, np.zeros(3)).rotation
    assert np.abs(repaired.T @ repaired - np.eye(3)).max() <= 1e-9
    with pytest.raises(InvalidRotation):
        RigidTransform(rot * 1.5, np.zeros(3))
    with pytest.raises(InvalidRotation):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))  # reflection
    with pytest.raises(InvalidRotation):
        RigidTransform(np.full((3, 3), np.nan), np.zeros(3))


def test_transforms_are_immutable():
    t = RigidTransform.identity()
    with pytest.raises(ValueError):
        t.rotation[0, 0] = 2.0


@given(st.floats(min_value=-50.0, max_value=50.0))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert abs(math.sin(w) - math.sin(a)) < 1e-9
    assert abs(math.cos(w) - math.cos(a)) < 1e-9
