import math

import numpy as np
import pytest

from motionweaver import synthetic
from motionweaver.config import EngineConfig
from motionweaver.features import (
    DIM,
    F_SLICE,
    H_SLICE,
    build_query,
    compute_stats,
    extract_clip_features,
    extract_feature,
    searchable_mask,
)
from motionweaver.geometry import quat_from_axis_angle, quat_mul, rotate_planar
from motionweaver.skeleton import MotionClip, ValidationError

CFG = EngineConfig()


def apply_planar_rigid(clip: MotionClip, yaw: float, t: np.ndarray) -> MotionClip:
    """Move a whole clip by a planar rigid transform (the oracle's transform)."""
    rotated_xy = rotate_planar(yaw, clip.root_pos[:, :2]) + t
    pos = clip.root_pos.copy()
    pos[:, :2] = rotated_xy
    spin = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw)
    return MotionClip(
        id=clip.id,
        fps=clip.fps,
        tag=clip.tag,
        root_pos=pos,
        root_quat=quat_mul(np.tile(spin, (clip.n_frames, 1)), clip.root_quat),
        joint_angles=clip.joint_angles,
    )


class TestExtractFeature:
    def test_standing_clip(self, skel):
        clip = synthetic.standing_clip()
        x = extract_feature(skel, clip, 10, CFG)
        assert x.shape == (DIM,)
        np.testing.assert_allclose(x[0:6], 0.0, atol=1e-12)  # future positions
        np.testing.assert_allclose(x[6:12:2], 1.0, atol=1e-12)  # facing cos
        np.testing.assert_allclose(x[7:12:2], 0.0, atol=1e-12)  # facing sin
        np.testing.assert_allclose(x[18:24], 0.0, atol=1e-12)  # foot velocities
        np.testing.assert_allclose(x[H_SLICE], 0.0, atol=1e-12)

    def test_uniform_motion(self, skel):
        # fps 100 makes the horizons land on whole frames at exactly those times.
        F, fps, v = 220, 100.0, 1.0
        t = np.arange(F) / fps
        pos = np.column_stack([v * t, np.zeros(F), np.full(F, 0.8)])
        quat = np.tile([1.0, 0.0, 0.0, 0.0], (F, 1))
        theta = np.tile(synthetic.standing_pose(), (F, 1))
        clip = MotionClip("u", fps, "locomotion", pos, quat, theta)
        x = extract_feature(synthetic.skeleton(), clip, 0, CFG)
        np.testing.assert_allclose(x[0:6], [0.33, 0, 0.67, 0, 1.0, 0], atol=1e-12)
        np.testing.assert_allclose(x[24:27], [1.0, 0.0, 0.0], atol=1e-9)

    def test_planar_rigid_invariance(self, skel, rng):
        base = synthetic.locomotion_clip("w", 1.0, 3.0, turn_rate=0.8)
        x0, _ = extract_clip_features(skel, base, CFG)
        for _ in range(8):
            yaw = rng.uniform(-math.pi, math.pi)
            t = rng.uniform(-5, 5, 2)
            moved = apply_planar_rigid(base, yaw, t)
            x1, _ = extract_clip_features(skel, moved, CFG)
            assert np.max(np.abs(x1 - x0)) < 1e-9

    def test_out_of_range_and_unsearchable(self, skel):
        clip = synthetic.standing_clip()
        with pytest.raises(IndexError):
            extract_feature(skel, clip, 10_000, CFG)
        with pytest.raises(ValidationError):
            extract_feature(skel, clip, clip.n_frames - 1, CFG)

    def test_searchable_mask_excludes_last_second(self):
        mask = searchable_mask(100, 30.0, CFG)
        assert mask.sum() == 70
        assert not mask[70:].any()

    def test_embedded_foot_tracks_trusted_over_fk(self, skel):
        from motionweaver.skeleton import batch_foot_positions

        clip = synthetic.locomotion_clip("w", 1.0, 2.0)
        fk_feet = batch_foot_positions(skel, clip)
        clip.foot_l = fk_feet[:, 0] + np.array([0.0, 0.0, 0.123])
        clip.foot_r = fk_feet[:, 1] + np.array([0.0, 0.0, 0.123])
        feet = batch_foot_positions(skel, clip)
        np.testing.assert_array_equal(feet[:, 0], clip.foot_l)
        x, _ = extract_clip_features(skel, clip, CFG)
        clip2 = synthetic.locomotion_clip("w", 1.0, 2.0)
        x2, _ = extract_clip_features(skel, clip2, CFG)
        # the embedded z offset shows up verbatim in the foot-position block
        np.testing.assert_allclose(x[:, 14] - x2[:, 14], 0.123, atol=1e-12)


class TestComputeStats:
    def test_two_rows(self):
        rows = np.zeros((2, DIM))
        rows[1, 0] = 2.0
        stats = compute_stats(rows)
        assert stats.mean[0] == 1.0
        assert stats.std[0] == 1.0

    def test_constant_dimension_floor(self):
        rows = np.ones((10, DIM)) * 3.3
        stats = compute_stats(rows, std_floor=1e-6)
        assert np.all(stats.std == 1e-6)
        z = stats.standardize(rows[0])
        assert np.all(np.isfinite(z))

    def test_standardized_columns(self, rng):
        rows = rng.normal(2.0, 5.0, size=(1000, DIM))
        stats = compute_stats(rows)
        z = stats.standardize(rows)
        assert np.max(np.abs(z.mean(axis=0))) < 1e-9
        assert np.max(np.abs(z.std(axis=0) - 1.0)) < 1e-6

    def test_inverse(self, rng):
        rows = rng.normal(size=(50, DIM))
        stats = compute_stats(rows)
        x = rng.normal(size=DIM)
        assert np.max(np.abs(stats.unstandardize(stats.standardize(x)) - x)) < 1e-12

    def test_too_few_rows(self):
        with pytest.raises(ValidationError):
            compute_stats(np.zeros((1, DIM)))


class TestBuildQuery:
    def test_rest_matches_standing_frame(self, skel):
        clip = synthetic.standing_clip()
        row = extract_feature(skel, clip, 10, CFG)
        q = build_query(
            pos_xy=clip.root_pos[10, :2],
            yaw=0.0,
            vel_world=np.zeros(3),
            accel_state=np.zeros(2),
            heading_rate=0.0,
            foot_block=row[F_SLICE],
            u_cmd=np.zeros(2),
            heading_target=0.0,
            config=CFG,
        )
        assert np.max(np.abs(q - row)) < 1e-9

    def test_steady_motion_matches_clip_row(self, skel):
        # Character moving exactly at the command: the predicted trajectory
        # equals a constant-velocity clip row sampled at the same times.
        F, fps, v = 220, 100.0, 1.5
        t = np.arange(F) / fps
        pos = np.column_stack([v * t, np.zeros(F), np.full(F, 0.8)])
        quat = np.tile([1.0, 0.0, 0.0, 0.0], (F, 1))
        theta = np.tile(synthetic.standing_pose(), (F, 1))
        clip = MotionClip("u", fps, "locomotion", pos, quat, theta)
        row = extract_feature(synthetic.skeleton(), clip, 50, CFG)
        q = build_query(
            pos_xy=pos[50, :2],
            yaw=0.0,
            vel_world=np.array([v, 0.0, 0.0]),
            accel_state=np.zeros(2),
            heading_rate=0.0,
            foot_block=row[F_SLICE],
            u_cmd=np.array([v, 0.0]),
            heading_target=0.0,
            config=CFG,
        )
        assert np.max(np.abs(q[:12] - row[:12])) < 1e-6

    def test_rotation_equivariance(self, rng):
        for _ in range(10):
            yaw0 = rng.uniform(-math.pi, math.pi)
            vel = rng.uniform(-2, 2, 3)
            accel = rng.uniform(-3, 3, 2)
            hrate = rng.uniform(-2, 2)
            foot = rng.uniform(-0.5, 0.5, 12)
            u = rng.uniform(-2, 2, 2)
            pos = rng.uniform(-4, 4, 2)
            target = math.atan2(u[1], u[0])
            q1 = build_query(pos, yaw0, vel, accel, hrate, foot, u, target, CFG)

            spin = rng.uniform(-math.pi, math.pi)
            t = rng.uniform(-3, 3, 2)
            vel_r = np.concatenate([rotate_planar(spin, vel[:2]), vel[2:]])
            u_r = rotate_planar(spin, u)
            accel_r = rotate_planar(spin, accel)
            q2 = build_query(
                rotate_planar(spin, pos) + t,
                yaw0 + spin,
                vel_r,
                accel_r,
                hrate,
                foot,
                u_r,
                math.atan2(u_r[1], u_r[0]),
                CFG,
            )
            assert np.max(np.abs(q2 - q1)) < 1e-9
