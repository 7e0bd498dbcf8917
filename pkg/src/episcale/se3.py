"""Rotations, unit directions and relative-motion algebra.

Relative motions follow the convention ``x_i = R_ij x_j + t_ij`` so that
``M_ij M_jk = M_ik``.  A :class:`RelativeMotion` stores only the rotation and
the translation *direction*; the norm of the translation is the unknown scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation as _Rot

ORTH_TOL = 1e-9
UNIT_TOL = 1e-12
COINCIDENT_TOL = 1e-12
POLE_TOL = 1e-8

# fixed detour used to move near-pole directions away from the azimuth singularity
_POLE_DETOUR = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


class GeometryError(ValueError):
    """Invalid rotation, direction or degenerate configuration."""


def _as_rotation(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise GeometryError(f"rotation must be 3x3, got shape {R.shape}")
    if np.abs(R.T @ R - np.eye(3)).max() > ORTH_TOL:
        raise GeometryError("rotation is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > ORTH_TOL:
        raise GeometryError("rotation determinant is not +1")
    return R


def _as_unit(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (3,):
        raise GeometryError(f"direction must be a 3-vector, got shape {d.shape}")
    if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
        raise GeometryError("direction is not unit norm")
    return d


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RelativeMotion:
    """Relative rotation and unit translation direction of one oriented edge."""

    rotation: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(_as_rotation(self.rotation)))
        object.__setattr__(self, "direction", _frozen(_as_unit(self.direction)))

    def __eq__(self, other):
        if not isinstance(other, RelativeMotion):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.direction, other.direction
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.direction.tobytes()))

    @classmethod
    def unchecked(cls, rotation, direction) -> "RelativeMotion":
        """Build without validation; callers guarantee the invariants."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "rotation", _frozen(rotation))
        object.__setattr__(obj, "direction", _frozen(direction))
        return obj

    def inverse(self) -> "RelativeMotion":
        return invert_relative(self)


@dataclass(frozen=True, eq=False)
class AbsolutePose:
    """World-to-camera pose ``x = R X + t``."""

    rotation: np.ndarray
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _frozen(_as_rotation(self.rotation)))
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (3,):
            raise GeometryError("translation must be a 3-vector")
        object.__setattr__(self, "translation", _frozen(t))

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    @classmethod
    def from_center(cls, rotation, center) -> "AbsolutePose":
        rotation = np.asarray(rotation, dtype=float)
        return cls(rotation, -rotation @ np.asarray(center, dtype=float))


def invert_relative(M: RelativeMotion, scale_hint: float | None = None) -> RelativeMotion:
    """Label of the reversed edge: rotation ``R^T`` and direction ``-R^T d``.

    The translation norm is unchanged by inversion, so ``scale_hint`` is only
    validated, never used.
    """
    if scale_hint is not None and not scale_hint > 0:
        raise GeometryError("scale_hint must be positive")
    Rt = M.rotation.T
    d = -(Rt @ M.direction)
    return RelativeMotion.unchecked(Rt.copy(), d)


def compose(M1: RelativeMotion, alpha1: float, M2: RelativeMotion, alpha2: float):
    """Rotation and unnormalized translation of ``M1 M2`` at the given scales."""
    if not (alpha1 > 0 and alpha2 > 0):
        raise GeometryError("scales must be positive")
    R = M1.rotation @ M2.rotation
    t = alpha1 * M1.direction + M1.rotation @ (alpha2 * M2.direction)
    return R, t


def rotation_angle(R) -> float:
    """Angle of a rotation matrix in ``[0, pi]``, accurate near 0 and pi."""
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def rotation_angles(Rs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`rotation_angle` over a stack of shape ``(..., 3, 3)``."""
    Rs = np.asarray(Rs, dtype=float)
    w = np.stack(
        [Rs[..., 2, 1] - Rs[..., 1, 2], Rs[..., 0, 2] - Rs[..., 2, 0], Rs[..., 1, 0] - Rs[..., 0, 1]],
        axis=-1,
    )
    s = 0.5 * np.linalg.norm(w, axis=-1)
    c = 0.5 * (np.trace(Rs, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(s, c)


def geodesic_distance(R1, R2) -> float:
    """Angular (geodesic) distance on SO(3); bi-invariant."""
    return rotation_angle(np.asarray(R1).T @ np.asarray(R2))


def chordal_distance(R1, R2) -> float:
    """Frobenius distance ``||R1 - R2||_F``; also bi-invariant."""
    return float(np.linalg.norm(np.asarray(R1) - np.asarray(R2)))


METRICS = {"geodesic": geodesic_distance, "chordal": chordal_distance}


def relative_from_absolute(Pi: AbsolutePose, Pj: AbsolutePose):
    """Relative motion of the pair ``(i, j)`` and its true scale."""
    R = Pi.rotation @ Pj.rotation.T
    t = Pi.translation - R @ Pj.translation
    alpha = float(np.linalg.norm(t))
    if alpha < COINCIDENT_TOL:
        raise GeometryError("coincident camera centers: direction undefined")
    return RelativeMotion.unchecked(R, t / alpha), alpha


def baseline_versor(Ri, M: RelativeMotion) -> np.ndarray:
    """Relative translation direction expressed in the absolute frame."""
    return -(np.asarray(Ri, dtype=float).T @ M.direction)


def project_to_so3(A) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(A, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotation_about(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return _Rot.from_rotvec(axis / np.linalg.norm(axis) * angle).as_matrix()


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform random rotation."""
    return _Rot.random(random_state=rng).as_matrix()


def rotation_from_euler(angles) -> np.ndarray:
    """Rotation from intrinsic Z-Y-X Euler angles in radians."""
    return _Rot.from_euler("ZYX", angles).as_matrix()


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def _to_spherical(d: np.ndarray):
    theta = np.arccos(np.clip(d[2], -1.0, 1.0))
    phi = np.arctan2(d[1], d[0])
    return theta, phi


def _from_spherical(theta: float, phi: float) -> np.ndarray:
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def _perturb_spherical(d: np.ndarray, sigma_rad: float, rng) -> np.ndarray:
    near_pole = abs(abs(d[2]) - 1.0) < POLE_TOL
    if near_pole:
        d = _POLE_DETOUR @ d
    theta, phi = _to_spherical(d)
    theta += rng.normal(0.0, sigma_rad)
    phi += rng.normal(0.0, sigma_rad)
    out = _from_spherical(theta, phi)
    if near_pole:
        out = _POLE_DETOUR.T @ out
    return out / np.linalg.norm(out)


def perturb_direction(d, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise on the two spherical angles of a unit vector."""
    if sigma_deg < 0:
        raise GeometryError("noise level must be non-negative")
    d = np.asarray(d, dtype=float)
    if sigma_deg == 0:
        return d.copy()
    return _perturb_spherical(d, np.deg2rad(sigma_deg), rng)


def perturb_rotation(R, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise in the angle-axis parametrization of a rotation.

    The rotation angle gets additive noise and the axis is perturbed on the
    sphere like :func:`perturb_direction`; the result is projected back onto
    SO(3).
    """
    if sigma_deg < 0:
        raise GeometryError("noise level must be non-negative")
    R = np.asarray(R, dtype=float)
    if sigma_deg == 0:
        return R.copy()
    sigma = np.deg2rad(sigma_deg)
    rotvec = _Rot.from_matrix(R).as_rotvec()
    angle = float(np.linalg.norm(rotvec))
    axis = rotvec / angle if angle > 0 else np.array([0.0, 0.0, 1.0])
    axis = _perturb_spherical(axis, sigma, rng)
    angle += rng.normal(0.0, sigma)
    return project_to_so3(_Rot.from_rotvec(axis * angle).as_matrix())
