"""Matching features: per-frame extraction, standardization, query assembly.

A feature vector has 27 dimensions, all expressed in the character's local
frame (root planar position + heading yaw) of the frame it describes:

====  =====  =======================================================
slot  dims   contents
====  =====  =======================================================
t     0:12   future planar root positions at the 3 horizons (6), then
             future planar facing unit vectors at the 3 horizons (6)
f     12:24  left foot position (3), right foot position (3),
             left foot velocity (3), right foot velocity (3)
h     24:27  root linear velocity (3)
====  =====  =======================================================

Frames whose 1-second future runs past the clip end have no feature and are
excluded from the searchable set (futures are never padded or fabricated).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import EngineConfig
from .geometry import quat_yaw, rotate_planar, wrap_angle
from .skeleton import MotionClip, Skeleton, ValidationError, batch_foot_positions
from .springs import predict_headings, predict_root_positions

DIM = 27
T_SLICE = slice(0, 12)
F_SLICE = slice(12, 24)
H_SLICE = slice(24, 27)


@dataclass(frozen=True)
class FeatureStats:
    """Per-dimension standardization stats plus (t, f, h) group weights."""

    mean: np.ndarray  # (27,)
    std: np.ndarray  # (27,), floored
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.mean.shape != (DIM,) or self.std.shape != (DIM,):
            raise ValidationError("stats must have 27 dimensions")
        if np.any(self.std <= 0):
            raise ValidationError("std must be positive (floored)")
        if any(w <= 0 for w in self.weights):
            raise ValidationError("group weights must be positive")

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def unstandardize(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean

    def dim_weights(self) -> np.ndarray:
        w = np.empty(DIM, dtype=np.float64)
        w[T_SLICE] = self.weights[0]
        w[F_SLICE] = self.weights[1]
        w[H_SLICE] = self.weights[2]
        return w


def compute_stats(
    features: np.ndarray,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
    std_floor: float = 1e-6,
) -> FeatureStats:
    """Sample mean and population std per dimension, std floored at `std_floor`."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != DIM:
        raise ValidationError(f"expected (n, {DIM}) feature matrix")
    if features.shape[0] < 2:
        raise ValidationError("need at least 2 feature rows for stats")
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    return FeatureStats(mean=mean, std=np.maximum(std, std_floor), weights=weights)


# ---------------------------------------------------------------------------
# Extraction from clips


def clip_headings(clip: MotionClip) -> np.ndarray:
    return quat_yaw(clip.root_quat)


def _central_difference(x: np.ndarray, fps: float) -> np.ndarray:
    """d/dt along axis 0, central inside, one-sided at the ends."""
    v = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) * (fps / 2.0)
    v[0] = (x[1] - x[0]) * fps
    v[-1] = (x[-1] - x[-2]) * fps
    return v


def _heading_rate(psi: np.ndarray, fps: float) -> np.ndarray:
    w = np.empty_like(psi)
    w[1:-1] = wrap_angle(psi[2:] - psi[:-2]) * (fps / 2.0)
    w[0] = wrap_angle(psi[1] - psi[0]) * fps
    w[-1] = wrap_angle(psi[-1] - psi[-2]) * fps
    return w


def searchable_mask(n_frames: int, fps: float, config: EngineConfig) -> np.ndarray:
    """True for frames whose farthest horizon still lands inside the clip."""
    far = max(config.horizon_frames(fps))
    idx = np.arange(n_frames)
    return idx + far < n_frames


def extract_clip_features(
    skeleton: Skeleton, clip: MotionClip, config: EngineConfig
):
    """Features for every frame of a clip.

    Returns (features (F, 27), searchable (F,) bool). The foot and velocity
    blocks are present-state quantities and are filled for every frame; the
    future-trajectory block exists only for searchable rows (zero elsewhere),
    and only searchable rows ever enter a search window.
    """
    F = clip.n_frames
    fps = clip.fps
    offsets = config.horizon_frames(fps)
    psi = clip_headings(clip)
    pos_xy = clip.root_pos[:, :2]

    feet = batch_foot_positions(skeleton, clip)  # (F, 2, 3)
    foot_vel = _central_difference(feet, fps)
    root_vel = _central_difference(clip.root_pos, fps)

    mask = searchable_mask(F, fps, config)
    features = np.zeros((F, DIM), dtype=np.float64)
    base = _lift(pos_xy)
    features[:, 12:15] = _to_character(psi, feet[:, 0] - base)
    features[:, 15:18] = _to_character(psi, feet[:, 1] - base)
    features[:, 18:21] = _to_character(psi, foot_vel[:, 0])
    features[:, 21:24] = _to_character(psi, foot_vel[:, 1])
    features[:, 24:27] = _to_character(psi, root_vel)
    rows = np.flatnonzero(mask)
    if rows.size:
        features[rows, :12] = _assemble_trajectory(pos_xy, psi, rows, offsets)
    return features, mask


def extract_feature(
    skeleton: Skeleton, clip: MotionClip, frame_index: int, config: EngineConfig
) -> np.ndarray:
    """Feature of one frame; raises if its 1-second future leaves the clip."""
    if not (0 <= frame_index < clip.n_frames):
        raise IndexError(f"frame {frame_index} out of range")
    mask = searchable_mask(clip.n_frames, clip.fps, config)
    if not mask[frame_index]:
        raise ValidationError(
            f"frame {frame_index} is within 1 s of the clip end and has no feature"
        )
    features, _ = extract_clip_features(skeleton, clip, config)
    return features[frame_index]


def _assemble_trajectory(pos_xy, psi, rows, offsets):
    out = np.empty((rows.size, 12), dtype=np.float64)
    psi_r = psi[rows]
    base = pos_xy[rows]
    for k, off in enumerate(offsets):
        fut = rows + off
        out[:, 2 * k : 2 * k + 2] = rotate_planar(-psi_r, pos_xy[fut] - base)
        dpsi = psi[fut] - psi_r
        out[:, 6 + 2 * k] = np.cos(dpsi)
        out[:, 7 + 2 * k] = np.sin(dpsi)
    return out


def _lift(p_xy: np.ndarray) -> np.ndarray:
    """(…, 2) planar points to (…, 3) with z = 0."""
    out = np.zeros(p_xy.shape[:-1] + (3,), dtype=np.float64)
    out[..., :2] = p_xy
    return out


def _to_character(psi, v3: np.ndarray) -> np.ndarray:
    """Rotate 3-vectors into the character frame (yaw only; z unchanged)."""
    out = np.empty_like(v3)
    out[..., :2] = rotate_planar(-psi, v3[..., :2])
    out[..., 2] = v3[..., 2]
    return out


# ---------------------------------------------------------------------------
# Runtime query


def build_query(
    pos_xy,
    yaw: float,
    vel_world,
    accel_state,
    heading_rate: float,
    foot_block: np.ndarray,
    u_cmd,
    heading_target: float,
    config: EngineConfig,
    horizons_s=None,
) -> np.ndarray:
    """Raw (pre-standardization) query feature from the live character state.

    The trajectory slot is predicted from the command springs; the foot slot
    is copied from the character's current foot state (already in the
    character frame); the velocity slot is the current world root velocity
    rotated into the character frame.

    pos_xy/yaw: current planar root pose. vel_world: current root velocity,
    world frame (3,). accel_state: planar spring acceleration (2,).
    heading_rate: current yaw rate. foot_block: (12,) feet positions and
    velocities in the character frame. u_cmd: commanded planar velocity.
    heading_target: resolved command heading (see `command_heading`).
    horizons_s overrides the config horizons; the engine passes the
    frame-quantized times so queries sample the future exactly where clip
    features do.
    """
    foot_block = np.asarray(foot_block, dtype=np.float64)
    if foot_block.shape != (12,):
        raise ValidationError("foot_block must have 12 entries")
    vel_world = np.asarray(vel_world, dtype=np.float64)
    y = config.trajectory_damping
    horizons = np.asarray(
        config.horizons_s if horizons_s is None else horizons_s, dtype=np.float64
    )

    pts = predict_root_positions(
        pos_xy, vel_world[:2], accel_state, u_cmd, y, horizons
    )
    headings = predict_headings(yaw, heading_rate, heading_target, y, horizons)

    q = np.empty(DIM, dtype=np.float64)
    local_pts = rotate_planar(-yaw, pts - np.asarray(pos_xy, dtype=np.float64))
    q[0:6] = local_pts.reshape(-1)
    dpsi = headings - yaw
    q[6:12:2] = np.cos(dpsi)
    q[7:12:2] = np.sin(dpsi)
    q[F_SLICE] = foot_block
    q[H_SLICE] = _to_character(yaw, vel_world)
    return q
