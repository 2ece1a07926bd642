import math

import numpy as np
import numpy.testing as npt
import pytest

from phantomgen.kinematics import (
    EulerAngle,
    JointFrame,
    MotionSequence,
    Quaternion,
    SkeletonFrame,
    SkeletonTopology,
    TrackingStatus,
    bone_lengths,
    euler_to_quat,
    quat_to_euler,
    slerp,
)


def euler_matrix(alpha, beta, gamma):
    """Independent oracle: explicit Rz(alpha) @ Rx(beta) @ Ry(gamma)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    rx = np.array([[1, 0, 0], [0, cb, -sb], [0, sb, cb]])
    ry = np.array([[cg, 0, sg], [0, 1, 0], [-sg, 0, cg]])
    return rz @ rx @ ry


def random_unit_quat(rng):
    v = rng.standard_normal(4)
    return Quaternion(*v)


class TestQuaternion:
    def test_construction_normalizes(self):
        q = Quaternion(2.0, 0.0, 0.0, 0.0)
        assert q.w == 1.0
        assert abs(q.norm() - 1.0) < 1e-9

    def test_canonical_sign(self):
        q = Quaternion(-0.5, 0.5, 0.5, 0.5)
        assert q.w >= 0.0

    def test_zero_quaternion_rejected(self):
        with pytest.raises(ValueError):
            Quaternion(0.0, 0.0, 0.0, 0.0)

    def test_multiply_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b = random_unit_quat(rng), random_unit_quat(rng)
            npt.assert_allclose(
                a.multiply(b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12
            )

    def test_norm_preserved_by_multiply(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = random_unit_quat(rng).multiply(random_unit_quat(rng))
            assert abs(q.norm() - 1.0) < 1e-9

    def test_rotate_unit_z_by_90_about_x(self):
        q = Quaternion(math.cos(math.pi / 4), math.sin(math.pi / 4), 0, 0)
        npt.assert_allclose(q.rotate([0, 0, 1]), [0, -1, 0], atol=1e-12)


class TestEulerConversion:
    def test_identity(self):
        e = quat_to_euler(Quaternion.identity())
        assert (e.alpha, e.beta, e.gamma) == (0.0, 0.0, 0.0)
        assert not e.gimbal_lock

    def test_single_axis_z(self):
        q = Quaternion(math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4))
        e = quat_to_euler(q)
        npt.assert_allclose([e.alpha, e.beta, e.gamma], [math.pi / 2, 0, 0], atol=1e-12)

    def test_euler_to_quat_identity(self):
        q = euler_to_quat(EulerAngle(0, 0, 0))
        assert (q.w, q.x, q.y, q.z) == (1.0, 0.0, 0.0, 0.0)

    def test_euler_to_quat_single_axis(self):
        q = euler_to_quat(EulerAngle(math.pi / 2, 0, 0))
        npt.assert_allclose(
            [q.w, q.x, q.y, q.z], [math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4)], atol=1e-12
        )

    def test_euler_to_quat_matches_matrix_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            alpha, beta, gamma = rng.uniform(-math.pi, math.pi, 3)
            beta = float(np.clip(beta, -1.4, 1.4))  # stay clear of gimbal lock
            q = euler_to_quat(EulerAngle(alpha, beta, gamma))
            npt.assert_allclose(q.to_matrix(), euler_matrix(alpha, beta, gamma), atol=1e-9)

    def test_roundtrip_random_quats(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 200:
            q = random_unit_quat(rng)
            e = quat_to_euler(q)
            if e.gimbal_lock:
                continue
            q2 = euler_to_quat(e)
            # q and -q are the same rotation; compare matrices
            npt.assert_allclose(q2.to_matrix(), q.to_matrix(), atol=1e-9)
            checked += 1

    def test_roundtrip_euler_fixed_point(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            alpha, gamma = rng.uniform(-math.pi, math.pi, 2)
            beta = rng.uniform(-1.4, 1.4)
            e = EulerAngle(alpha, beta, gamma)
            e2 = quat_to_euler(euler_to_quat(e))
            npt.assert_allclose(
                [e2.alpha, e2.beta, e2.gamma], [alpha, beta, gamma], atol=1e-9
            )

    def test_gimbal_lock_flagged_and_consistent(self):
        # beta = +90 deg exactly: Z and Y axes coincide
        e = quat_to_euler(euler_to_quat(EulerAngle(0.4, math.pi / 2, 0.3)))
        assert e.gimbal_lock
        assert e.gamma == 0.0
        # the flagged decomposition must still reproduce the rotation
        q = euler_to_quat(EulerAngle(0.4, math.pi / 2, 0.3))
        npt.assert_allclose(euler_to_quat(e).to_matrix(), q.to_matrix(), atol=1e-7)

    def test_angles_wrapped(self):
        e = EulerAngle(3 * math.pi, 0, -3 * math.pi)
        assert -math.pi < e.alpha <= math.pi
        assert -math.pi < e.gamma <= math.pi


class TestSlerp:
    def test_endpoints(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            q0, q1 = random_unit_quat(rng), random_unit_quat(rng)
            npt.assert_allclose(slerp(q0, q1, 0.0).as_array(), q0.as_array(), atol=1e-12)
            npt.assert_allclose(slerp(q0, q1, 1.0).as_array(), q1.as_array(), atol=1e-12)

    def test_geodesic_midpoint(self):
        q0 = Quaternion.identity()
        q1 = Quaternion(math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4))
        mid = slerp(q0, q1, 0.5)
        expect = Quaternion(math.cos(math.pi / 8), 0, 0, math.sin(math.pi / 8))
        npt.assert_allclose(mid.as_array(), expect.as_array(), atol=1e-12)

    def test_constant_angular_velocity(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            q0, q1 = random_unit_quat(rng), random_unit_quat(rng)
            omega = q0.angle_to(q1)
            for t in (0.25, 0.5, 0.75):
                qt = slerp(q0, q1, t)
                assert abs(q0.angle_to(qt) - t * omega) < 1e-8

    def test_increments_between_samples(self):
        rng = np.random.default_rng(23)
        q0, q1 = random_unit_quat(rng), random_unit_quat(rng)
        omega = q0.angle_to(q1)
        t1, t2 = 0.2, 0.9
        a = slerp(q0, q1, t1)
        b = slerp(q0, q1, t2)
        assert abs(a.angle_to(b) - (t2 - t1) * omega) < 1e-8

    def test_stays_on_unit_sphere(self):
        rng = np.random.default_rng(24)
        q0, q1 = random_unit_quat(rng), random_unit_quat(rng)
        for t in np.linspace(0, 1, 1000):
            assert abs(slerp(q0, q1, float(t)).norm() - 1.0) < 1e-9

    def test_antipodal_takes_short_arc(self):
        q0 = Quaternion(math.cos(0.1), 0, 0, math.sin(0.1))
        q1_raw = np.array([-math.cos(0.2), 0, 0, -math.sin(0.2)])
        # constructor canonicalizes the sign, so build the angle check directly
        q1 = Quaternion(*q1_raw)
        assert q0.angle_to(slerp(q0, q1, 0.5)) <= q0.angle_to(q1)

    def test_near_parallel_falls_back_to_nlerp(self):
        q0 = Quaternion.identity()
        q1 = Quaternion(1.0, 1e-12, 0, 0)
        q = slerp(q0, q1, 0.5)
        assert abs(q.norm() - 1.0) < 1e-12


def two_joint_topology():
    return SkeletonTopology(("a", "b"), (("a", "b"),))


class TestSkeletonTypes:
    def test_bone_lengths_unit(self):
        topo = two_joint_topology()
        frame = SkeletonFrame(
            0.0,
            (
                JointFrame(np.zeros(3), Quaternion.identity()),
                JointFrame(np.array([0.0, 1.0, 0.0]), Quaternion.identity()),
            ),
        )
        assert bone_lengths(frame, topo) == [1.0]

    def test_bone_lengths_degenerate(self):
        topo = two_joint_topology()
        frame = SkeletonFrame(
            0.0,
            (
                JointFrame(np.zeros(3), Quaternion.identity()),
                JointFrame(np.zeros(3), Quaternion.identity()),
            ),
        )
        assert bone_lengths(frame, topo) == [0.0]

    def test_bone_lengths_synthetic_skeleton(self):
        topo = SkeletonTopology(
            ("root", "mid", "tip", "branch"),
            (("root", "mid"), ("mid", "tip"), ("mid", "branch")),
        )
        frame = SkeletonFrame(
            0.0,
            (
                JointFrame(np.array([0.0, 0.0, 0.0]), Quaternion.identity()),
                JointFrame(np.array([0.0, 0.25, 0.0]), Quaternion.identity()),
                JointFrame(np.array([0.0, 0.25, 0.4]), Quaternion.identity()),
                JointFrame(np.array([0.3, 0.25, 0.0]), Quaternion.identity()),
            ),
        )
        npt.assert_allclose(bone_lengths(frame, topo), [0.25, 0.4, 0.3], atol=1e-12)

    def test_topology_rejects_cycle(self):
        with pytest.raises(ValueError):
            SkeletonTopology(("a", "b", "c"), (("a", "b"), ("b", "c"), ("c", "a")))

    def test_topology_rejects_disconnected(self):
        with pytest.raises(ValueError):
            SkeletonTopology(("a", "b", "c", "d"), (("a", "b"), ("c", "d"), ("d", "c")))

    def test_sequence_requires_increasing_timestamps(self):
        topo = two_joint_topology()
        j = (
            JointFrame(np.zeros(3), Quaternion.identity()),
            JointFrame(np.ones(3), Quaternion.identity()),
        )
        with pytest.raises(ValueError):
            MotionSequence(topo, (SkeletonFrame(0.0, j), SkeletonFrame(0.0, j)))

    def test_sequence_rejects_empty(self):
        with pytest.raises(ValueError):
            MotionSequence(two_joint_topology(), ())

    def test_from_arrays_roundtrip(self):
        topo = two_joint_topology()
        rng = np.random.default_rng(5)
        pos = rng.standard_normal((4, 2, 3))
        quat = rng.standard_normal((4, 2, 4))
        stat = np.full((4, 2), 2)
        seq = MotionSequence.from_arrays(topo, [0.0, 0.1, 0.2, 0.3], pos, quat, stat)
        assert len(seq) == 4
        npt.assert_allclose(seq.positions(), pos)
        assert seq.statuses().tolist() == stat.tolist()
        norms = np.linalg.norm(seq.quaternions(), axis=2)
        npt.assert_allclose(norms, 1.0, atol=1e-12)

    def test_status_codes(self):
        assert int(TrackingStatus.INVISIBLE) == 0
        assert int(TrackingStatus.REFERRED) == 1
        assert int(TrackingStatus.OBSERVABLE) == 2
