"""Phantom lower-limb kinematics generation from observed upper-limb motion."""

__version__ = "0.1.0"

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

__all__ = [
    "EulerAngle",
    "JointFrame",
    "MotionSequence",
    "Quaternion",
    "SkeletonFrame",
    "SkeletonTopology",
    "TrackingStatus",
    "bone_lengths",
    "euler_to_quat",
    "quat_to_euler",
    "slerp",
    "__version__",
]
