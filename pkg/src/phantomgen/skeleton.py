"""Default body layout: joint names, topology, channel groups, rest pose.

The sensor hardware this package targets reports a richer joint set than
the classic 20/25-joint depth cameras; the default skeleton uses 9 joints
per limb so each limb slices cleanly into the parallel model pipelines.
All of this is configuration: custom topologies and channel lists can be
supplied anywhere a default is used.
"""

from __future__ import annotations

import numpy as np

from phantomgen.kinematics import SkeletonTopology

CENTRAL_JOINTS = ("spine_base", "spine_mid", "neck", "head")

ARM_CHAIN = (
    "clavicle",
    "shoulder",
    "upper_arm",
    "elbow",
    "forearm",
    "wrist",
    "hand",
    "thumb",
    "hand_tip",
)
LEG_CHAIN = (
    "hip",
    "thigh",
    "knee",
    "shin",
    "ankle",
    "heel",
    "foot",
    "toe",
    "toe_tip",
)

ARM_JOINTS_LEFT = tuple(f"{j}_l" for j in ARM_CHAIN)
ARM_JOINTS_RIGHT = tuple(f"{j}_r" for j in ARM_CHAIN)
LEG_JOINTS_LEFT = tuple(f"{j}_l" for j in LEG_CHAIN)
LEG_JOINTS_RIGHT = tuple(f"{j}_r" for j in LEG_CHAIN)

ARM_JOINTS = ARM_JOINTS_LEFT + ARM_JOINTS_RIGHT
LEG_JOINTS = LEG_JOINTS_LEFT + LEG_JOINTS_RIGHT

# input channel groups: shoulder region, elbow region, wrist/hand region
SHOULDER_GROUP = tuple(
    f"{j}_{s}" for s in ("l", "r") for j in ("clavicle", "shoulder", "upper_arm")
)
ELBOW_GROUP = tuple(f"{j}_{s}" for s in ("l", "r") for j in ("elbow", "forearm"))
WRIST_GROUP = tuple(
    f"{j}_{s}" for s in ("l", "r") for j in ("wrist", "hand", "thumb", "hand_tip")
)

# primary lower-limb joints, used when the target is the compact 6-joint set
PRIMARY_LEG_JOINTS = ("hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r")

ALL_JOINTS = CENTRAL_JOINTS + ARM_JOINTS + LEG_JOINTS


def _chain_bones(parent, names):
    bones = [(parent, names[0])]
    for a, b in zip(names, names[1:]):
        bones.append((a, b))
    return bones


def default_topology() -> SkeletonTopology:
    bones = [
        ("spine_base", "spine_mid"),
        ("spine_mid", "neck"),
        ("neck", "head"),
    ]
    for side in ("l", "r"):
        arm = [f"{j}_{side}" for j in ARM_CHAIN]
        bones += _chain_bones("spine_mid", arm[:7])  # clavicle..hand
        bones.append((f"hand_{side}", f"thumb_{side}"))
        bones.append((f"hand_{side}", f"hand_tip_{side}"))
        leg = [f"{j}_{side}" for j in LEG_CHAIN]
        bones += _chain_bones("spine_base", leg[:6])  # hip..heel
        bones.append((f"ankle_{side}", f"foot_{side}"))
        bones.append((f"foot_{side}", f"toe_{side}"))
        bones.append((f"toe_{side}", f"toe_tip_{side}"))
    return SkeletonTopology(ALL_JOINTS, tuple(bones))


def rest_pose() -> dict:
    """Neutral standing pose, meters; +Y up, +Z forward, x mirrored by side."""
    pose = {
        "spine_base": (0.0, 0.90, 0.0),
        "spine_mid": (0.0, 1.15, 0.0),
        "neck": (0.0, 1.40, 0.0),
        "head": (0.0, 1.55, 0.0),
    }
    arm_x = (0.08, 0.20, 0.30, 0.42, 0.52, 0.64, 0.72, 0.76, 0.82)
    arm_y = (1.38, 1.38, 1.36, 1.34, 1.32, 1.30, 1.29, 1.26, 1.28)
    leg_x = (0.10, 0.11, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12, 0.12)
    leg_y = (0.85, 0.62, 0.45, 0.26, 0.08, 0.02, 0.02, 0.02, 0.02)
    leg_z = (0.0, 0.0, 0.0, 0.0, 0.0, -0.05, 0.05, 0.12, 0.17)
    for side, sign in (("l", -1.0), ("r", 1.0)):
        for i, j in enumerate(ARM_CHAIN):
            pose[f"{j}_{side}"] = (sign * arm_x[i], arm_y[i], 0.0)
        for i, j in enumerate(LEG_CHAIN):
            pose[f"{j}_{side}"] = (sign * leg_x[i], leg_y[i], leg_z[i])
    return {k: np.array(v) for k, v in pose.items()}


DEFAULT_AMPLITUDES = {
    "clavicle": 0.010,
    "shoulder": 0.020,
    "upper_arm": 0.045,
    "elbow": 0.075,
    "forearm": 0.105,
    "wrist": 0.140,
    "hand": 0.170,
    "thumb": 0.180,
    "hand_tip": 0.200,
    "hip": 0.030,
    "thigh": 0.070,
    "knee": 0.110,
    "shin": 0.150,
    "ankle": 0.190,
    "heel": 0.200,
    "foot": 0.210,
    "toe": 0.225,
    "toe_tip": 0.240,
}


def default_amplitudes() -> dict:
    """Per-joint swing amplitude in meters (limb joints only)."""
    out = {}
    for side in ("l", "r"):
        for kind, amp in DEFAULT_AMPLITUDES.items():
            out[f"{kind}_{side}"] = amp
    return out
