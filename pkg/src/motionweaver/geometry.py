"""Quaternion and planar rigid-transform helpers.

Conventions: Z-up, right-handed world; quaternions are (w, x, y, z) unit
quaternions; the character's forward axis is body +x; heading is the yaw of
the forward axis projected onto the ground plane. Angles are radians.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap angle(s) to the half-open interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), TWO_PI)


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    out = np.array(q, copy=True)
    out[..., 1:] = -out[..., 1:]
    return out


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q)
    v = np.asarray(v)
    u = q[..., 1:]
    w = q[..., 0:1]
    # v + 2w(u x v) + 2u x (u x v)
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_axis_angle(axis: np.ndarray, angle) -> np.ndarray:
    """Unit quaternion for rotation of `angle` about unit `axis`.

    Broadcasts: axis (..., 3) with scalar or (...,) angles.
    """
    angle = np.asarray(angle, dtype=np.float64)
    half = 0.5 * angle
    s = np.sin(half)
    w = np.cos(half)
    xyz = np.asarray(axis) * s[..., None]
    return np.concatenate([w[..., None], xyz], axis=-1)


def quat_yaw(q: np.ndarray) -> np.ndarray:
    """Heading: yaw of the body forward axis (+x) projected to the x-y plane."""
    fwd = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
    return np.arctan2(fwd[..., 1], fwd[..., 0])


def rot_z(angle) -> np.ndarray:
    """Planar rotation matrix/matrices, shape (..., 2, 2)."""
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    return np.stack(
        [np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2
    )


def rotate_planar(angle, v: np.ndarray) -> np.ndarray:
    """Rotate 2-vector(s) v by yaw angle(s) about +z."""
    angle = np.asarray(angle, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    x, y = v[..., 0], v[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


class PlanarTransform:
    """Rigid SE(2) transform: p_world = R(yaw) @ p + t."""

    __slots__ = ("yaw", "t")

    def __init__(self, yaw: float = 0.0, t=(0.0, 0.0)):
        self.yaw = float(yaw)
        self.t = np.array(t, dtype=np.float64)

    @classmethod
    def identity(cls) -> "PlanarTransform":
        return cls(0.0, (0.0, 0.0))

    def apply(self, p: np.ndarray) -> np.ndarray:
        return rotate_planar(self.yaw, np.asarray(p, dtype=np.float64)) + self.t

    def apply_yaw(self, yaw):
        return wrap_angle(self.yaw + yaw)

    def compose(self, other: "PlanarTransform") -> "PlanarTransform":
        """self o other: apply `other` first, then `self`."""
        return PlanarTransform(
            wrap_angle(self.yaw + other.yaw), self.apply(other.t)
        )

    def inverse(self) -> "PlanarTransform":
        inv_yaw = -self.yaw
        return PlanarTransform(inv_yaw, rotate_planar(inv_yaw, -self.t))

    def almost_equal(self, other: "PlanarTransform", tol: float = 1e-12) -> bool:
        return (
            abs(wrap_angle(self.yaw - other.yaw)) <= tol
            and float(np.max(np.abs(self.t - other.t))) <= tol
        )

    def __repr__(self):
        return f"PlanarTransform(yaw={self.yaw:.6f}, t=({self.t[0]:.6f}, {self.t[1]:.6f}))"
