"""Rotation primitives and seeded random streams.

All vector helpers broadcast over leading batch axes: a vector is ``(..., 3)``
and a rotation is ``(..., 3, 3)`` (body -> inertial, row-major).
"""
from __future__ import annotations

import numpy as np

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

_SMALL_ANGLE = 1e-8


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix with ``hat(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


hat_map = hat


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat` (antisymmetric part is assumed)."""
    S = np.asarray(S, dtype=float)
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula for the rotation vector ``w`` (rad)."""
    w = np.asarray(w, dtype=float)
    theta2 = np.sum(w * w, axis=-1)
    theta = np.sqrt(theta2)
    small = theta < _SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    # second-order Taylor branch near zero
    a = np.where(small, 1.0 - theta2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    K = hat(w)
    K2 = K @ K
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * K2


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """One Newton step of the polar projection back onto SO(3)."""
    RtR = np.swapaxes(R, -1, -2) @ R
    return R @ (1.5 * np.eye(3) - 0.5 * RtR)


def euler_zyx(R: np.ndarray) -> np.ndarray:
    """(roll, pitch, yaw) for ``R = Rz(yaw) Ry(pitch) Rx(roll)``."""
    R = np.asarray(R, dtype=float)
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    pitch = -np.arcsin(np.clip(R[..., 2, 0], -1.0, 1.0))
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


def rot_from_euler_zyx(angles: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    r, p, y = angles[..., 0], angles[..., 1], angles[..., 2]
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    R = np.empty(angles.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched cross product (faster than ``np.cross`` on small arrays)."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", A, v)


def rmatvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``A.T @ v`` with batch broadcasting."""
    return np.einsum("...ji,...j->...i", A, v)


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a * a, axis=-1))


class RngStream:
    """Seeded random stream owned by a single environment.

    Thin wrapper over ``numpy.random.Generator`` (PCG64). Child streams from
    :meth:`spawn` are statistically independent of the parent and of each other.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self) -> int:
        return int(self._seq.entropy)

    def spawn(self, n: int) -> list[RngStream]:
        return [RngStream(s) for s in self._seq.spawn(n)]

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def random(self, size=None):
        return self.gen.random(size)
