"""Skeleton definition, forward kinematics, clip files, and mirror augmentation.

A skeleton is a topologically-sorted tree of single-axis revolute joints
hanging off a floating root body. Body 0 is the root; joint i drives body
i + 1. Multi-DoF articulations are modelled as chains of single-DoF joints,
which keeps forward kinematics a plain chain of (translate, rotate-about-axis)
steps.

File formats (UTF-8 JSON, one document per file; floats round-trip exactly
through ``repr``):

* skeleton: ``{"joints": [{"name", "parent", "offset": [3], "axis": [3],
  "mirror", "mirror_sign"}], "left_foot": j, "right_foot": j}`` where
  ``parent`` and ``mirror`` are joint indices (parent -1 means the root body)
  and ``left_foot``/``right_foot`` are joint indices of the foot bodies.
* clip: ``{"id", "fps", "tag", "terrain"?, "frames": [{"p": [3],
  "q": [4 wxyz], "theta": [n]}]}``; frames may optionally embed
  ``"foot_l"``/``"foot_r"`` world positions, which are trusted over FK.
* annotation: ``{"clip_id", "s", "e", "entry_len", "skill"?}`` or a list of
  such objects. ``skill`` defaults to ``clip_id``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import quat_from_axis_angle, quat_mul, quat_rotate

QUAT_NORM_TOL = 1e-6
AXIS_NORM_TOL = 1e-9

LOCOMOTION = "locomotion"
SKILL = "skill"


class ValidationError(ValueError):
    """Raised when a skeleton, clip, or annotation violates an invariant."""


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int  # joint index; -1 means the root body
    offset: np.ndarray  # (3,) meters, in parent frame
    axis: np.ndarray  # (3,) unit rotation axis
    mirror: int  # joint index of the bilateral partner (self for midline)
    mirror_sign: float  # +-1, applied to the partner's angle when mirroring


@dataclass(frozen=True)
class Skeleton:
    joints: tuple[Joint, ...]
    left_foot_body: int  # index into FK output (0 is the root body)
    right_foot_body: int

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_bodies(self) -> int:
        return len(self.joints) + 1

    def validate(self) -> None:
        n = self.n_joints
        for i, j in enumerate(self.joints):
            if not (-1 <= j.parent < i):
                raise ValidationError(
                    f"joint {i} ({j.name}): parent {j.parent} is not a previous joint"
                )
            if abs(np.linalg.norm(j.axis) - 1.0) > AXIS_NORM_TOL:
                raise ValidationError(f"joint {i} ({j.name}): axis is not unit length")
            if not (0 <= j.mirror < n):
                raise ValidationError(f"joint {i} ({j.name}): missing mirror pair")
            if j.mirror_sign not in (-1.0, 1.0):
                raise ValidationError(f"joint {i} ({j.name}): mirror_sign must be +-1")
        for i, j in enumerate(self.joints):
            k = j.mirror
            if self.joints[k].mirror != i:
                raise ValidationError(
                    f"mirror map is not involutive at joint {i} ({j.name})"
                )
            if self.joints[k].mirror_sign != j.mirror_sign:
                raise ValidationError(
                    f"mirror signs disagree between joints {i} and {k}"
                )
        for body in (self.left_foot_body, self.right_foot_body):
            if not (1 <= body <= n):
                raise ValidationError(f"foot body index {body} out of range")

    def mirror_permutation(self) -> tuple[np.ndarray, np.ndarray]:
        perm = np.array([j.mirror for j in self.joints], dtype=np.int64)
        sign = np.array([j.mirror_sign for j in self.joints], dtype=np.float64)
        return perm, sign


@dataclass
class Frame:
    root_pos: np.ndarray  # (3,) meters
    root_quat: np.ndarray  # (4,) unit quaternion, wxyz
    joint_angles: np.ndarray  # (n_joints,) radians

    def copy(self) -> "Frame":
        return Frame(
            self.root_pos.copy(), self.root_quat.copy(), self.joint_angles.copy()
        )


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box of `size` posed in the plane: yaw about +z, base at z."""

    size: np.ndarray  # (3,) meters
    x: float
    y: float
    z: float
    yaw: float

    def mirrored(self) -> "Box3":
        return Box3(self.size.copy(), self.x, -self.y, self.z, -self.yaw)

    def to_dict(self) -> dict:
        return {
            "size": [float(v) for v in self.size],
            "x": float(self.x),
            "y": float(self.y),
            "z": float(self.z),
            "yaw": float(self.yaw),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Box3":
        size = np.asarray(d["size"], dtype=np.float64)
        if size.shape != (3,) or np.any(size <= 0):
            raise ValidationError("terrain size must be 3 positive numbers")
        return cls(size, float(d["x"]), float(d["y"]), float(d["z"]), float(d["yaw"]))


@dataclass
class MotionClip:
    id: str
    fps: float
    tag: str  # LOCOMOTION or SKILL
    root_pos: np.ndarray  # (F, 3)
    root_quat: np.ndarray  # (F, 4)
    joint_angles: np.ndarray  # (F, n_joints)
    terrain: Box3 | None = None
    foot_l: np.ndarray | None = None  # optional embedded (F, 3) world positions
    foot_r: np.ndarray | None = None

    @property
    def n_frames(self) -> int:
        return self.root_pos.shape[0]

    def frame(self, i: int) -> Frame:
        return Frame(self.root_pos[i], self.root_quat[i], self.joint_angles[i])

    def validate(self, skeleton: Skeleton | None = None) -> None:
        if self.tag not in (LOCOMOTION, SKILL):
            raise ValidationError(f"clip {self.id}: unknown tag {self.tag!r}")
        if self.fps <= 0:
            raise ValidationError(f"clip {self.id}: fps must be > 0")
        if self.n_frames < 2:
            raise ValidationError(f"clip {self.id}: needs at least 2 frames")
        if not np.all(np.isfinite(self.root_pos)) or not np.all(
            np.isfinite(self.joint_angles)
        ):
            raise ValidationError(f"clip {self.id}: non-finite values")
        norms = np.linalg.norm(self.root_quat, axis=1)
        if np.any(np.abs(norms - 1.0) > QUAT_NORM_TOL):
            raise ValidationError(f"clip {self.id}: root quaternion far from unit")
        if skeleton is not None and self.joint_angles.shape[1] != skeleton.n_joints:
            raise ValidationError(
                f"clip {self.id}: {self.joint_angles.shape[1]} joint angles for a "
                f"{skeleton.n_joints}-joint skeleton"
            )


@dataclass(frozen=True)
class SkillAnnotation:
    """Skill segment [start, end] plus the pre-skill entry window length.

    Transitions into the skill are permitted in [start - entry_len, start].
    """

    clip_id: str
    start: int
    end: int
    entry_len: int
    skill: str = ""

    def __post_init__(self):
        if not self.skill:
            object.__setattr__(self, "skill", self.clip_id)

    def validate(self, clip: MotionClip) -> None:
        if self.start - self.entry_len < 0:
            raise ValidationError(
                f"annotation for {self.clip_id}: entry window start "
                f"{self.start} - {self.entry_len} < 0 violates the window bound"
            )
        if not (self.start <= self.end < clip.n_frames):
            raise ValidationError(
                f"annotation for {self.clip_id}: need start <= end < clip length, "
                f"got [{self.start}, {self.end}] in {clip.n_frames} frames"
            )


# ---------------------------------------------------------------------------
# Forward kinematics


def forward_kinematics(skeleton: Skeleton, frame: Frame):
    """World pose of every body: positions (n_bodies, 3), quats (n_bodies, 4).

    Body 0 is the root; body i + 1 is driven by joint i:
    pose = parent pose o translate(offset) o rotate(axis, angle).
    """
    n = skeleton.n_joints
    if frame.joint_angles.shape[0] != n:
        raise ValidationError(
            f"frame has {frame.joint_angles.shape[0]} angles, skeleton has {n} joints"
        )
    pos = np.empty((n + 1, 3), dtype=np.float64)
    quat = np.empty((n + 1, 4), dtype=np.float64)
    pos[0] = frame.root_pos
    quat[0] = frame.root_quat
    for i, joint in enumerate(skeleton.joints):
        p = joint.parent + 1
        pos[i + 1] = pos[p] + quat_rotate(quat[p], joint.offset)
        quat[i + 1] = quat_mul(
            quat[p], quat_from_axis_angle(joint.axis, frame.joint_angles[i])
        )
    return pos, quat


def batch_foot_positions(skeleton: Skeleton, clip: MotionClip) -> np.ndarray:
    """World positions of (left, right) foot bodies per frame, shape (F, 2, 3).

    Embedded foot tracks are trusted when present; otherwise FK is run,
    vectorized over frames.
    """
    if clip.foot_l is not None and clip.foot_r is not None:
        return np.stack([clip.foot_l, clip.foot_r], axis=1)

    F = clip.n_frames
    n = skeleton.n_joints
    pos = np.empty((F, n + 1, 3), dtype=np.float64)
    quat = np.empty((F, n + 1, 4), dtype=np.float64)
    pos[:, 0] = clip.root_pos
    quat[:, 0] = clip.root_quat
    for i, joint in enumerate(skeleton.joints):
        p = joint.parent + 1
        pos[:, i + 1] = pos[:, p] + quat_rotate(quat[:, p], joint.offset)
        quat[:, i + 1] = quat_mul(
            quat[:, p],
            quat_from_axis_angle(joint.axis, clip.joint_angles[:, i]),
        )
    return pos[:, (skeleton.left_foot_body, skeleton.right_foot_body)]


# ---------------------------------------------------------------------------
# Mirroring


def mirror_frame(skeleton: Skeleton, frame: Frame) -> Frame:
    perm, sign = skeleton.mirror_permutation()
    return Frame(
        root_pos=frame.root_pos * np.array([1.0, -1.0, 1.0]),
        root_quat=frame.root_quat * np.array([1.0, -1.0, 1.0, -1.0]),
        joint_angles=sign * frame.joint_angles[perm],
    )


def mirror_clip(skeleton: Skeleton, clip: MotionClip, new_id: str | None = None) -> MotionClip:
    """Reflect a clip across the x-z plane.

    Root y is negated, the root quaternion is conjugated by the reflection
    ((w, x, y, z) -> (w, -x, y, -z)), joint angles are permuted by the mirror
    map with sign flips, and any terrain asset pose is mirrored identically.
    """
    skeleton.validate()
    perm, sign = skeleton.mirror_permutation()
    y_flip = np.array([1.0, -1.0, 1.0])
    mirror_pos = lambda p: p * y_flip  # noqa: E731
    if new_id is None:
        new_id = (
            clip.id[: -len("__mirror")]
            if clip.id.endswith("__mirror")
            else clip.id + "__mirror"
        )
    return MotionClip(
        id=new_id,
        fps=clip.fps,
        tag=clip.tag,
        root_pos=clip.root_pos * y_flip,
        root_quat=clip.root_quat * np.array([1.0, -1.0, 1.0, -1.0]),
        joint_angles=sign[None, :] * clip.joint_angles[:, perm],
        terrain=clip.terrain.mirrored() if clip.terrain is not None else None,
        foot_l=mirror_pos(clip.foot_r) if clip.foot_r is not None else None,
        foot_r=mirror_pos(clip.foot_l) if clip.foot_l is not None else None,
    )


# ---------------------------------------------------------------------------
# Parsing / serialization


def _as_float_array(value, shape, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: non-finite value")
    return arr


def parse_skeleton(data: bytes | str) -> Skeleton:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ValidationError(f"skeleton file is not valid JSON: {e}") from e
    joints = []
    for i, jd in enumerate(doc.get("joints", [])):
        try:
            joints.append(
                Joint(
                    name=str(jd["name"]),
                    parent=int(jd["parent"]),
                    offset=_as_float_array(jd["offset"], (3,), f"joint {i} offset"),
                    axis=_as_float_array(jd["axis"], (3,), f"joint {i} axis"),
                    mirror=int(jd["mirror"]),
                    mirror_sign=float(jd["mirror_sign"]),
                )
            )
        except KeyError as e:
            raise ValidationError(f"joint {i}: missing field {e}") from e
    try:
        skel = Skeleton(
            joints=tuple(joints),
            left_foot_body=int(doc["left_foot"]) + 1,
            right_foot_body=int(doc["right_foot"]) + 1,
        )
    except KeyError as e:
        raise ValidationError(f"skeleton: missing field {e}") from e
    skel.validate()
    return skel


def serialize_skeleton(skel: Skeleton) -> str:
    doc = {
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "offset": [float(v) for v in j.offset],
                "axis": [float(v) for v in j.axis],
                "mirror": j.mirror,
                "mirror_sign": j.mirror_sign,
            }
            for j in skel.joints
        ],
        "left_foot": skel.left_foot_body - 1,
        "right_foot": skel.right_foot_body - 1,
    }
    return json.dumps(doc, indent=1)


def parse_clip(data: bytes | str, skeleton: Skeleton | None = None) -> MotionClip:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ValidationError(f"clip file is not valid JSON: {e}") from e
    try:
        frames = doc["frames"]
        fps = float(doc["fps"])
        clip_id = str(doc["id"])
        tag = str(doc["tag"])
    except KeyError as e:
        raise ValidationError(f"clip: missing field {e}") from e
    if fps <= 0:
        raise ValidationError(f"clip {clip_id}: fps must be > 0, got {fps}")
    if len(frames) < 2:
        raise ValidationError(f"clip {clip_id}: needs at least 2 frames")

    F = len(frames)
    ndof = len(frames[0]["theta"])
    root_pos = np.empty((F, 3))
    root_quat = np.empty((F, 4))
    joint_angles = np.empty((F, ndof))
    has_feet = "foot_l" in frames[0]
    foot_l = np.empty((F, 3)) if has_feet else None
    foot_r = np.empty((F, 3)) if has_feet else None
    for i, fd in enumerate(frames):
        root_pos[i] = _as_float_array(fd["p"], (3,), f"frame {i} p")
        q = _as_float_array(fd["q"], (4,), f"frame {i} q")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise ValidationError(
                f"clip {clip_id} frame {i}: quaternion norm {norm} exceeds tolerance"
            )
        if norm != 1.0:
            q = q / norm
        root_quat[i] = q
        joint_angles[i] = _as_float_array(fd["theta"], (ndof,), f"frame {i} theta")
        if has_feet:
            foot_l[i] = _as_float_array(fd["foot_l"], (3,), f"frame {i} foot_l")
            foot_r[i] = _as_float_array(fd["foot_r"], (3,), f"frame {i} foot_r")

    terrain = Box3.from_dict(doc["terrain"]) if doc.get("terrain") else None
    clip = MotionClip(
        id=clip_id,
        fps=fps,
        tag=tag,
        root_pos=root_pos,
        root_quat=root_quat,
        joint_angles=joint_angles,
        terrain=terrain,
        foot_l=foot_l,
        foot_r=foot_r,
    )
    clip.validate(skeleton)
    return clip


def serialize_clip(clip: MotionClip) -> str:
    frames = []
    for i in range(clip.n_frames):
        fd = {
            "p": [float(v) for v in clip.root_pos[i]],
            "q": [float(v) for v in clip.root_quat[i]],
            "theta": [float(v) for v in clip.joint_angles[i]],
        }
        if clip.foot_l is not None:
            fd["foot_l"] = [float(v) for v in clip.foot_l[i]]
            fd["foot_r"] = [float(v) for v in clip.foot_r[i]]
        frames.append(fd)
    doc = {
        "id": clip.id,
        "fps": clip.fps,
        "tag": clip.tag,
        "terrain": clip.terrain.to_dict() if clip.terrain is not None else None,
        "frames": frames,
    }
    return json.dumps(doc)


def parse_annotations(data: bytes | str) -> list[SkillAnnotation]:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ValidationError(f"annotation file is not valid JSON: {e}") from e
    if isinstance(doc, dict):
        doc = [doc]
    out = []
    for i, ad in enumerate(doc):
        try:
            out.append(
                SkillAnnotation(
                    clip_id=str(ad["clip_id"]),
                    start=int(ad["s"]),
                    end=int(ad["e"]),
                    entry_len=int(ad["entry_len"]),
                    skill=str(ad.get("skill", "")),
                )
            )
        except KeyError as e:
            raise ValidationError(f"annotation {i}: missing field {e}") from e
    return out


def serialize_annotations(annotations: list[SkillAnnotation]) -> str:
    return json.dumps(
        [
            {
                "clip_id": a.clip_id,
                "s": a.start,
                "e": a.end,
                "entry_len": a.entry_len,
                "skill": a.skill,
            }
            for a in annotations
        ]
    )
