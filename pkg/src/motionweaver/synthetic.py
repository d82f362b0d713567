"""Bundled procedural clips: a 29-DoF biped, gait cycles, and a vault skill.

These stand in for retargeted capture data at desk scale: walk/run cycles at
1.0 and 2.0 m/s (straight and arcs), a standing clip, and a "vault" skill
clip paired with a box terrain asset. Gait parameters are chosen so one
walk cycle is exactly 30 frames at 30 fps.
"""

from __future__ import annotations

import math

import numpy as np

from .config import round_half_up
from .geometry import quat_from_axis_angle
from .skeleton import (
    LOCOMOTION,
    SKILL,
    Box3,
    Joint,
    MotionClip,
    Skeleton,
    SkillAnnotation,
)

FPS = 30.0
ROOT_HEIGHT = 0.79

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])

# (name, parent, offset, axis, mirror_sign); one chain per articulation.
_WAIST = [
    ("waist_yaw", -1, (0.0, 0.0, 0.10), Z, -1.0),
    ("waist_roll", 0, (0.0, 0.0, 0.05), X, -1.0),
    ("waist_pitch", 1, (0.0, 0.0, 0.05), Y, 1.0),
]
_LEG = [
    ("hip_pitch", -1, (0.0, 0.12, -0.05), Y, 1.0),
    ("hip_roll", 0, (0.0, 0.0, -0.05), X, -1.0),
    ("hip_yaw", 1, (0.0, 0.0, -0.05), Z, -1.0),
    ("knee", 2, (0.0, 0.0, -0.30), Y, 1.0),
    ("ankle_pitch", 3, (0.0, 0.0, -0.30), Y, 1.0),
    ("ankle_roll", 4, (0.0, 0.0, -0.04), X, -1.0),
]
_ARM = [
    ("shoulder_pitch", -1, (0.0, 0.16, 0.25), Y, 1.0),
    ("shoulder_roll", 0, (0.0, 0.05, 0.0), X, -1.0),
    ("shoulder_yaw", 1, (0.0, 0.0, -0.10), Z, -1.0),
    ("elbow", 2, (0.0, 0.0, -0.15), Y, 1.0),
    ("wrist_roll", 3, (0.0, 0.0, -0.15), X, -1.0),
    ("wrist_pitch", 4, (0.0, 0.0, -0.05), Y, 1.0),
    ("wrist_yaw", 5, (0.0, 0.0, -0.03), Z, -1.0),
]


def build_skeleton() -> Skeleton:
    joints: list[Joint] = []

    def add_chain(defs, prefix, base, y_sign):
        start = len(joints)
        for name, parent, offset, axis, sign in defs:
            off = np.array(offset) * np.array([1.0, y_sign, 1.0])
            joints.append(
                Joint(
                    name=f"{prefix}{name}",
                    parent=base if parent == -1 else start + parent,
                    offset=off,
                    axis=np.array(axis, dtype=np.float64),
                    mirror=0,  # filled below
                    mirror_sign=sign,
                )
            )
        return start

    add_chain(_WAIST, "", -1, 1.0)
    l_leg = add_chain(_LEG, "l_", -1, 1.0)
    r_leg = add_chain(_LEG, "r_", -1, -1.0)
    l_arm = add_chain(_ARM, "l_", 2, 1.0)
    r_arm = add_chain(_ARM, "r_", 2, -1.0)

    mirror = list(range(len(joints)))
    for i in range(len(_LEG)):
        mirror[l_leg + i], mirror[r_leg + i] = r_leg + i, l_leg + i
    for i in range(len(_ARM)):
        mirror[l_arm + i], mirror[r_arm + i] = r_arm + i, l_arm + i
    joints = [
        Joint(j.name, j.parent, j.offset, j.axis, mirror[i], j.mirror_sign)
        for i, j in enumerate(joints)
    ]
    skel = Skeleton(
        joints=tuple(joints),
        left_foot_body=l_leg + len(_LEG) - 1 + 1,  # l_ankle_roll body
        right_foot_body=r_leg + len(_LEG) - 1 + 1,
    )
    skel.validate()
    return skel


_SKEL = None


def skeleton() -> Skeleton:
    global _SKEL
    if _SKEL is None:
        _SKEL = build_skeleton()
    return _SKEL


def _index(name: str) -> int:
    return next(i for i, j in enumerate(skeleton().joints) if j.name == name)


def standing_pose() -> np.ndarray:
    theta = np.zeros(skeleton().n_joints)
    for side in ("l_", "r_"):
        theta[_index(side + "hip_pitch")] = -0.1
        theta[_index(side + "knee")] = 0.2
        theta[_index(side + "ankle_pitch")] = -0.1
        theta[_index(side + "shoulder_pitch")] = 0.1
        theta[_index(side + "elbow")] = 0.3
    return theta


def _gait_params(speed: float):
    if speed <= 1.5:
        return {"freq": 1.0, "hip": 0.45, "knee": 0.65, "bob": 0.02, "arm": 0.35}
    return {"freq": 1.25, "hip": 0.62, "knee": 0.85, "bob": 0.03, "arm": 0.5}


def _gait_angles(phase: np.ndarray, p: dict) -> np.ndarray:
    """Joint angle matrix (F, n) for a gait at the given stride phases."""
    n = skeleton().n_joints
    theta = np.tile(standing_pose(), (phase.size, 1))
    sin_p, sin_q = np.sin(phase), np.sin(phase + math.pi)
    for side, s in (("l_", sin_p), ("r_", sin_q)):
        theta[:, _index(side + "hip_pitch")] += -p["hip"] * s
        theta[:, _index(side + "knee")] += p["knee"] * 0.5 * (1.0 + np.cos(phase if side == "l_" else phase + math.pi))
        theta[:, _index(side + "ankle_pitch")] += 0.15 * s
        theta[:, _index(side + "shoulder_pitch")] += p["arm"] * s * -1.0
    theta[:, _index("waist_yaw")] += 0.08 * sin_p
    theta[:, _index("waist_roll")] += 0.04 * np.sin(phase)
    return theta


def locomotion_clip(
    clip_id: str,
    speed: float,
    duration_s: float,
    turn_rate: float = 0.0,
    phase0: float = 0.0,
) -> MotionClip:
    """Procedural gait translating at `speed` m/s with constant yaw rate."""
    F = round_half_up(duration_s * FPS)
    t = np.arange(F) / FPS
    p = _gait_params(speed)
    phase = 2.0 * math.pi * p["freq"] * t + phase0
    psi = turn_rate * t
    if abs(turn_rate) < 1e-12:
        xy = np.stack([speed * t, np.zeros(F)], axis=1)
    else:
        r = speed / turn_rate
        xy = np.stack([r * np.sin(psi), r * (1.0 - np.cos(psi))], axis=1)
    z = ROOT_HEIGHT + p["bob"] * np.sin(2.0 * phase)
    return MotionClip(
        id=clip_id,
        fps=FPS,
        tag=LOCOMOTION,
        root_pos=np.column_stack([xy, z]),
        root_quat=quat_from_axis_angle(Z, psi),
        joint_angles=_gait_angles(phase, p),
    )


def standing_clip(clip_id: str = "stand", duration_s: float = 3.0) -> MotionClip:
    F = round_half_up(duration_s * FPS)
    theta = np.tile(standing_pose(), (F, 1))
    pos = np.tile(np.array([0.0, 0.0, ROOT_HEIGHT]), (F, 1))
    quat = np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (F, 1))
    return MotionClip(
        id=clip_id, fps=FPS, tag=LOCOMOTION, root_pos=pos, root_quat=quat, joint_angles=theta
    )


def vault_clip(clip_id: str = "vault") -> tuple[MotionClip, SkillAnnotation]:
    """Walk-in, vault over a 0.4 m box, walk-out; annotated skill segment.

    Layout at 30 fps: approach [0, 60), vault [60, 90), walk-out [90, 195);
    the skill is annotated s=60, e=165 with a one-gait-cycle entry window.
    The walk-out is long enough that the transition blend fully decays well
    before the annotated end even for an entry at the window's late edge.
    """
    speed = 1.0
    p = _gait_params(speed)
    F = round_half_up(6.5 * FPS)
    t = np.arange(F) / FPS
    phase = 2.0 * math.pi * p["freq"] * t
    x = speed * t
    z = ROOT_HEIGHT + p["bob"] * np.sin(2.0 * phase)
    theta = _gait_angles(phase, p)

    # Vault window: raise the root over the box and tuck.
    t0, t1 = 2.0, 3.0
    sel = (t >= t0) & (t < t1)
    s = (t[sel] - t0) / (t1 - t0)
    hump = np.sin(math.pi * s)
    z[sel] += 0.45 * hump
    for side in ("l_", "r_"):
        theta[sel, _index(side + "knee")] += 1.1 * hump
        theta[sel, _index(side + "hip_pitch")] += -0.8 * hump
        theta[sel, _index(side + "shoulder_pitch")] += -1.2 * hump

    clip = MotionClip(
        id=clip_id,
        fps=FPS,
        tag=SKILL,
        root_pos=np.column_stack([x, np.zeros(F), z]),
        root_quat=np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (F, 1)),
        joint_angles=theta,
        terrain=Box3(
            size=np.array([0.5, 0.8, 0.4]),
            x=float(speed * (t0 + t1) / 2.0),
            y=0.0,
            z=0.0,
            yaw=0.0,
        ),
    )
    ann = SkillAnnotation(
        clip_id=clip_id,
        start=round_half_up(t0 * FPS),
        end=round_half_up(5.5 * FPS),
        entry_len=30,
        skill=clip_id,
    )
    return clip, ann


def bundle() -> tuple[Skeleton, list[MotionClip], list[SkillAnnotation]]:
    """The full synthetic corpus used by tests, acceptance, and `db build`."""
    clips = [standing_clip()]
    for speed, label in ((1.0, "walk"), (2.0, "run")):
        clips.append(locomotion_clip(f"{label}_straight", speed, 8.0))
        for rate, rlabel in (
            (math.pi / 4, "left45"),
            (-math.pi / 4, "right45"),
            (math.pi / 2, "left90"),
            (-math.pi / 2, "right90"),
        ):
            clips.append(locomotion_clip(f"{label}_{rlabel}", speed, 6.0, turn_rate=rate))
    vclip, ann = vault_clip()
    clips.append(vclip)
    return skeleton(), clips, [ann]


def wander_clip(clip_id: str, n_frames: int, seed: int = 0) -> MotionClip:
    """Long meandering locomotion clip for large-database benchmarks.

    Curvature and speed drift over randomized intervals, giving feature rows
    with the correlated, low-intrinsic-dimension structure of real motion
    databases.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames) / FPS
    n_knots = max(2, n_frames // 60)
    knots = np.linspace(0.0, t[-1], n_knots)
    turn = np.interp(t, knots, rng.uniform(-1.2, 1.2, n_knots))
    speed = np.interp(t, knots, rng.uniform(0.8, 2.2, n_knots))
    psi = np.concatenate([[0.0], np.cumsum(turn[:-1]) / FPS])
    vel = speed[:, None] * np.stack([np.cos(psi), np.sin(psi)], axis=1)
    xy = np.concatenate([[[0.0, 0.0]], np.cumsum(vel[:-1], axis=0) / FPS])
    freq = 0.75 + 0.25 * speed
    phase = np.concatenate([[0.0], 2.0 * math.pi * np.cumsum(freq[:-1]) / FPS])
    p = _gait_params(1.0)
    z = ROOT_HEIGHT + p["bob"] * np.sin(2.0 * phase)
    return MotionClip(
        id=clip_id,
        fps=FPS,
        tag=LOCOMOTION,
        root_pos=np.column_stack([xy, z]),
        root_quat=quat_from_axis_angle(Z, psi),
        joint_angles=_gait_angles(phase, _gait_params(float(speed.mean()))),
    )
