"""Inertialization: carry the pose/rate offset at a playback jump and decay it.

At a transition the offset between the old and new stream is captured per
channel (root height, heading as a wrapped scalar, joint angles — the planar
root position is re-anchored exactly by the composer and carries no offset).
The offset then decays to zero with the critically damped spring closed form
(goal zero), so the output stays continuous at the switch and approaches the
raw stream.

Once the offset and its rate drop below `SNAP_EPS` the state snaps to exact
zero, making the output equal the raw stream verbatim from then on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle

SNAP_EPS = 1e-9

# Channel layout: [0] root height, [1] heading, [2:] joint angles.
HEIGHT = 0
HEADING = 1
JOINTS = slice(2, None)


def pack_channels(height: float, heading: float, joints: np.ndarray) -> np.ndarray:
    out = np.empty(2 + joints.shape[0], dtype=np.float64)
    out[HEIGHT] = height
    out[HEADING] = heading
    out[JOINTS] = joints
    return out


@dataclass
class InertializationState:
    offset: np.ndarray  # per-channel value offset
    offset_rate: np.ndarray
    damping: float
    elapsed: float = 0.0

    @classmethod
    def zero(cls, n_joints: int, damping: float) -> "InertializationState":
        n = 2 + n_joints
        return cls(np.zeros(n), np.zeros(n), damping)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.offset) or np.any(self.offset_rate))

    def magnitude(self) -> float:
        return float(
            max(np.max(np.abs(self.offset)), np.max(np.abs(self.offset_rate)))
        )


def begin_inertialization(
    pose_prev: np.ndarray,
    rate_prev: np.ndarray,
    pose_new: np.ndarray,
    rate_new: np.ndarray,
    damping: float,
) -> InertializationState:
    """Offset state at a switch: prev minus new, heading via shortest arc.

    `pose_prev`/`rate_prev` should be the currently *emitted* values (raw
    plus any still-decaying offset), so back-to-back transitions accumulate
    and stay continuous at each switch.
    """
    if pose_prev.shape != pose_new.shape or rate_prev.shape != rate_new.shape:
        raise ValueError("pose/rate channel dimensions disagree")
    offset = pose_prev - pose_new
    offset[HEADING] = wrap_angle(offset[HEADING])
    return InertializationState(
        offset=offset, offset_rate=rate_prev - rate_new, damping=damping
    )


def apply_inertialization(
    state: InertializationState,
    dt: float,
    raw_pose: np.ndarray,
    raw_rate: np.ndarray | None = None,
):
    """Advance offsets by dt (goal zero) and blend onto the raw channels.

    Returns (pose, rate); mutates `state`. With a zero state the raw pose is
    returned bit-exact.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if state.is_zero:
        state.elapsed += dt
        return raw_pose.copy(), (raw_rate.copy() if raw_rate is not None else None)

    y = state.damping
    j1 = state.offset_rate + y * state.offset
    decay = math.exp(-y * dt)
    state.offset = decay * (state.offset + dt * j1)
    state.offset_rate = decay * (state.offset_rate - y * dt * j1)
    state.elapsed += dt
    if state.magnitude() < SNAP_EPS:
        state.offset[:] = 0.0
        state.offset_rate[:] = 0.0

    pose = raw_pose + state.offset
    pose[HEADING] = wrap_angle(pose[HEADING])
    rate = raw_rate + state.offset_rate if raw_rate is not None else None
    return pose, rate


def blended_now(state: InertializationState, raw_pose: np.ndarray) -> np.ndarray:
    """Current blended pose without advancing time."""
    pose = raw_pose + state.offset
    pose[HEADING] = wrap_angle(pose[HEADING])
    return pose
