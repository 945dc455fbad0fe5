"""Rigid-transform algebra for physical-to-digital pose mapping.

All rotations are right-handed 3x3 matrices internally; the wire format uses
unit quaternions (x, y, z, w).  Angles are radians unless a name says degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Orthonormality drift handling: repair by polar projection above REPAIR,
# reject outright above REJECT (per-entry infinity norm of R^T R - I).
ORTHO_REPAIR = 1e-6
ORTHO_REJECT = 1e-2


class InvalidRotation(ValueError):
    """Rotation matrix too far from orthonormal (or a reflection)."""


def _ortho_error(rot: np.ndarray) -> float:
    return float(np.abs(rot.T @ rot - np.eye(3)).max())


def _polar_project(rot: np.ndarray) -> np.ndarray:
    # Nearest rotation in Frobenius norm: U V^T from the SVD.
    u, _, vt = np.linalg.svd(rot)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass(frozen=True)
class RigidTransform:
    """3D rotation + translation; the unit of all frame algebra."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.isfinite(rot).all() and np.isfinite(trans).all()):
            raise InvalidRotation("non-finite transform entries")
        err = _ortho_error(rot)
        if err > ORTHO_REJECT:
            raise InvalidRotation(f"rotation drift {err:.3g} exceeds reject threshold")
        if err > ORTHO_REPAIR:
            rot = _polar_project(rot)
        if np.linalg.det(rot) < 0:
            raise InvalidRotation("rotation is a reflection (det < 0)")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return RigidTransform(m[:3, :3], m[:3, 3])

    def transform_point(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.translation

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return (
            np.abs(self.rotation - other.rotation).max() <= tol
            and np.abs(self.translation - other.translation).max() <= tol
        )

    def __repr__(self):
        t = self.translation
        return f"RigidTransform(t=[{t[0]:.4g}, {t[1]:.4g}, {t[2]:.4g}])"


@dataclass(frozen=True)
class PoseSample:
    """One stamped pose from the robot stream.

    `timestep` must strictly increase across accepted samples within a
    session; `stamp` is seconds since session start.
    """

    transform: RigidTransform
    timestep: int
    stamp: float


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Homogeneous product a*b restricted to rotation/translation blocks."""
    return RigidTransform(
        a.rotation @ b.rotation, a.rotation @ b.translation + a.translation
    )


def inverse(a: RigidTransform) -> RigidTransform:
    rt = a.rotation.T
    return RigidTransform(rt, -(rt @ a.translation))


def initial_offset(digital0: RigidTransform, physical0: RigidTransform) -> RigidTransform:
    """Anchoring offset mapping the physical frame at t0 onto the digital one.

    Satisfies apply_offset(initial_offset(d0, p0), p0) == d0.
    """
    return compose(digital0, inverse(physical0))


def apply_offset(offset: RigidTransform, physical_k: RigidTransform) -> RigidTransform:
    """Digital pose for the physical pose at step k under a fixed offset."""
    return compose(offset, physical_k)


def resume_offset(
    digital_at_pause: RigidTransform, physical_at_resume: RigidTransform
) -> RigidTransform:
    """Re-anchoring offset after a pause.

    Guarantees the digital twin continues exactly from its pre-pause pose no
    matter where the physical robot moved in the meantime.
    """
    return compose(digital_at_pause, inverse(physical_at_resume))


# ---------------------------------------------------------------------------
# Rotation constructors and Euler/quaternion conversions.

def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def matrix_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic Z-Y-X (yaw, pitch, roll), right-handed z-up."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def euler_from_matrix(rot: np.ndarray) -> tuple[float, float, float]:
    """(roll, pitch, yaw) inverting matrix_from_euler.

    At |pitch| = 90 deg the decomposition is degenerate; we pick the
    roll = 0 branch and fold everything into yaw (the atan2 branch of the
    yaw extraction).
    """
    sp = -float(rot[2, 0])
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) >= 1.0 - 1e-12:
        roll = 0.0
        yaw = math.atan2(-float(rot[0, 1]), float(rot[1, 1]))
    else:
        roll = math.atan2(float(rot[2, 1]), float(rot[2, 2]))
        yaw = math.atan2(float(rot[1, 0]), float(rot[0, 0]))
    return roll, pitch, yaw


def quat_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Unit quaternion (x, y, z, w) from a rotation matrix (Shepperd)."""
    m = np.asarray(rot, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w = (m[2, 1] - m[1, 2]) / s
        x = 0.25 * s
        y = (m[0, 1] + m[1, 0]) / s
        z = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w = (m[0, 2] - m[2, 0]) / s
        x = (m[0, 1] + m[1, 0]) / s
        y = 0.25 * s
        z = (m[1, 2] + m[2, 1]) / s
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w = (m[1, 0] - m[0, 1]) / s
        x = (m[0, 2] + m[2, 0]) / s
        y = (m[1, 2] + m[2, 1]) / s
        z = 0.25 * s
    q = np.array([x, y, z, w])
    q /= np.linalg.norm(q)
    if q[3] < 0:
        q = -q
    return q


def matrix_from_quat(q) -> np.ndarray:
    x, y, z, w = (float(v) for v in q)
    n = math.sqrt(x * x + y * y + z * z + w * w)
    if n < 1e-12:
        raise InvalidRotation("zero-norm quaternion")
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rt_from_xyzquat(x, y, z, qx, qy, qz, qw) -> RigidTransform:
    return RigidTransform(matrix_from_quat((qx, qy, qz, qw)), np.array([x, y, z], dtype=np.float64))


def xyzquat_from_rt(t: RigidTransform) -> tuple[float, ...]:
    q = quat_from_matrix(t.rotation)
    p = t.translation
    return (
        float(p[0]), float(p[1]), float(p[2]),
        float(q[0]), float(q[1]), float(q[2]), float(q[3]),
    )


# ---------------------------------------------------------------------------
# Engine units: centimeters, degrees, left-handed pitch/yaw.

ENGINE_SCALE = 100.0  # meters -> centimeters


@dataclass(frozen=True)
class EnginePose:
    """Pose in engine conventions: cm positions, degree angles, pitch and
    yaw negated relative to the right-handed world frame."""

    position: np.ndarray
    roll: float
    pitch: float
    yaw: float


def to_engine(p: RigidTransform) -> EnginePose:
    roll, pitch, yaw = euler_from_matrix(p.rotation)
    return EnginePose(
        position=p.translation * ENGINE_SCALE,
        roll=math.degrees(roll),
        pitch=-math.degrees(pitch),
        yaw=-math.degrees(yaw),
    )


def from_engine(e: EnginePose) -> RigidTransform:
    rot = matrix_from_euler(
        math.radians(e.roll), math.radians(-e.pitch), math.radians(-e.yaw)
    )
    return RigidTransform(rot, np.asarray(e.position, dtype=np.float64) / ENGINE_SCALE)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a
