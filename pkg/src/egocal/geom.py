"""SO(3)/SE(3) primitives: rotations, rigid transforms, axis-angle, sampling.

All angles are radians, all lengths are meters. Every type is immutable after
construction and all operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRotation, SingularInput

ROTATION_TOL = 1e-9


def _as_locked(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RotationMatrix:
    """A proper rotation: 3x3 orthonormal matrix with determinant +1."""

    m: np.ndarray

    def __post_init__(self):
        m = _as_locked(self.m)
        if m.shape != (3, 3):
            raise InvalidRotation(f"expected 3x3 matrix, got shape {m.shape}")
        if np.linalg.norm(m.T @ m - np.eye(3)) > ROTATION_TOL:
            raise InvalidRotation("matrix is not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > ROTATION_TOL:
            raise InvalidRotation("matrix determinant is not +1")
        object.__setattr__(self, "m", m)

    @staticmethod
    def identity() -> "RotationMatrix":
        return RotationMatrix(np.eye(3))

    def apply(self, v) -> np.ndarray:
        return self.m @ np.asarray(v, dtype=float)

    def transpose(self) -> "RotationMatrix":
        return RotationMatrix(self.m.T)


@dataclass(frozen=True)
class AxisAngle:
    """Rotation as a unit axis and an angle in [0, pi]."""

    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = _as_locked(self.axis)
        if axis.shape != (3,):
            raise ValueError(f"axis must be a 3-vector, got shape {axis.shape}")
        if not 0.0 <= self.angle <= np.pi + 1e-12:
            raise ValueError(f"angle must lie in [0, pi], got {self.angle}")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("axis must be a unit vector")
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True)
class Transform:
    """Rigid transform (rotation then translation), i.e. an element of SE(3)."""

    rotation: RotationMatrix
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = _as_locked(self.translation)
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got shape {t.shape}")
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Transform":
        return Transform(RotationMatrix.identity(), np.zeros(3))

    @staticmethod
    def from_matrix(h: np.ndarray) -> "Transform":
        h = np.asarray(h, dtype=float)
        return Transform(RotationMatrix(h[:3, :3]), h[:3, 3])

    def matrix(self) -> np.ndarray:
        h = np.eye(4)
        h[:3, :3] = self.rotation.m
        h[:3, 3] = self.translation
        return h

    def apply(self, p) -> np.ndarray:
        return self.rotation.m @ np.asarray(p, dtype=float) + self.translation

    def compose(self, other: "Transform") -> "Transform":
        return Transform(
            RotationMatrix(self.rotation.m @ other.rotation.m),
            self.rotation.m @ other.translation + self.translation,
        )

    def invert(self) -> "Transform":
        rt = self.rotation.m.T
        return Transform(RotationMatrix(rt), -rt @ self.translation)


def compose(a: Transform, b: Transform) -> Transform:
    """Homogeneous-matrix composition: (a * b).apply(p) == a.apply(b.apply(p))."""
    return a.compose(b)


def invert(a: Transform) -> Transform:
    return a.invert()


def skew(v) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_from_axis_angle(aa: AxisAngle) -> RotationMatrix:
    """Rodrigues' formula: matrix exponential of the skew form of axis * angle."""
    k = skew(aa.axis)
    m = np.eye(3) + np.sin(aa.angle) * k + (1.0 - np.cos(aa.angle)) * (k @ k)
    return RotationMatrix(m)


def axis_angle_from_rotation(r: RotationMatrix) -> AxisAngle:
    """Inverse of rotation_from_axis_angle with angle normalized to [0, pi].

    Near the angle = pi singularity the axis magnitudes are recovered from the
    symmetric part (well conditioned there) with the largest diagonal entry as
    pivot, and signs from the skew part.
    """
    m = r.m
    # sin from the skew part, cos from the trace: atan2 is accurate everywhere.
    w = 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    s = np.linalg.norm(w)
    c = 0.5 * (np.trace(m) - 1.0)
    angle = float(np.arctan2(s, c))
    if angle < 1e-12:
        return AxisAngle(np.array([0.0, 0.0, 1.0]), 0.0)
    if angle < 3.0 * np.pi / 4.0:
        return AxisAngle(w / s, angle)
    # Near pi the skew part vanishes; use m = c I + (1-c) a a^T + s [a]x instead.
    # Diagonal gives |a_i| (well conditioned, 1-c ~ 2), symmetric off-diagonals
    # give relative signs via the largest-|a_i| pivot, skew part the overall sign.
    omc = 1.0 - c  # 1 - cos(angle), close to 2 near pi
    a2 = np.clip((np.diag(m) - c) / omc, 0.0, None)  # m_ii = c + (1-c) a_i^2
    axis = np.sqrt(a2)
    p = int(np.argmax(axis))
    # Relative signs from the symmetric off-diagonal products a_i a_j.
    sym = 0.5 * (m + m.T)
    for i in range(3):
        if i == p:
            continue
        prod = sym[p, i] / omc  # = a_p a_i
        axis[i] = np.copysign(axis[i], prod) if axis[i] > 0 else 0.0
    # Overall sign from the skew part when available (angle < pi).
    if s > 1e-12 and np.dot(axis, w) < 0:
        axis = -axis
    axis = axis / np.linalg.norm(axis)
    return AxisAngle(axis, min(angle, np.pi))


def project_to_so3(m: np.ndarray) -> RotationMatrix:
    """Frobenius-nearest rotation: U diag(1, 1, det(U V^T)) V^T from the SVD."""
    m = np.asarray(m, dtype=float)
    u, sv, vt = np.linalg.svd(m)
    if sv[-1] < 1e-12:
        raise SingularInput("matrix is numerically singular; projection undefined")
    d = np.sign(np.linalg.det(u @ vt))
    return RotationMatrix(u @ np.diag([1.0, 1.0, d]) @ vt)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_rotation(rng_seed) -> RotationMatrix:
    """Haar-uniform rotation via a normalized Gaussian quaternion."""
    rng = _rng(rng_seed)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    m = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    return project_to_so3(m)


def random_transform(rng_seed, translation_scale: float = 1.0) -> Transform:
    rng = _rng(rng_seed)
    r = random_rotation(rng)
    return Transform(r, rng.normal(scale=translation_scale, size=3))
