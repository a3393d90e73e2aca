"""
Quaternion Algebra

Scalar-plus-vector quaternions and the handful of operations the attitude
controller needs: Hamilton product, conjugation, norms and the identification
of pure quaternions with 3-vectors.

Nothing here normalizes implicitly. Unit norm is restored only by the
embedding term of the extended dynamics.
"""

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
import numpy.typing as npt

Vec3 = npt.NDArray[np.float64]

Scalar = Union[int, float, np.floating]


def vec3(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> Vec3:
    """Build a float64 3-vector."""
    return np.array((x, y, z), dtype=np.float64)


def as_vec3(values: Iterable[float]) -> Vec3:
    """Coerce any length-3 sequence into a float64 3-vector."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"expected 3 components, got shape {arr.shape}")
    return arr


def cross(a: Vec3, b: Vec3) -> Vec3:
    # faster than np.cross for single 3-vectors
    return np.array(
        (
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        )
    )


@dataclass(frozen=True)
class Quaternion:
    """
    Quaternion q = s + v, stored as an explicit scalar and 3-vector.

    The arithmetic operators follow the algebra of the quaternions:
    ``p * q`` is the Hamilton product, ``k * q`` scales, ``p + q`` and
    ``p - q`` act componentwise on the ambient space.
    """

    s: float
    v: Vec3

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64))

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, np.zeros(3))

    @classmethod
    def zero(cls) -> "Quaternion":
        return cls(0.0, np.zeros(3))

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "Quaternion":
        """Build from scalar-first components [w, x, y, z]."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (4,):
            raise ValueError(f"expected 4 components [w, x, y, z], got shape {arr.shape}")
        return cls(arr[0], arr[1:4].copy())

    def as_array(self) -> npt.NDArray[np.float64]:
        """Scalar-first components [w, x, y, z]."""
        return np.concatenate(((self.s,), self.v))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.s) and np.all(np.isfinite(self.v)))

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.s + other.s, self.v + other.v)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.s - other.s, self.v - other.v)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.s, -self.v)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return mul(self, other)
        return Quaternion(self.s * other, self.v * other)

    def __rmul__(self, other: Scalar) -> "Quaternion":
        return Quaternion(other * self.s, other * self.v)

    def __repr__(self) -> str:
        x, y, z = self.v
        return f"Quaternion(s={self.s:.6g}, v=({x:.6g}, {y:.6g}, {z:.6g}))"


def mul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product pq = (p_s q_s - <p_v, q_v>, p_s q_v + q_s p_v + p_v x q_v)."""
    return Quaternion(
        p.s * q.s - float(p.v @ q.v),
        p.s * q.v + q.s * p.v + cross(p.v, q.v),
    )


def conj(q: Quaternion) -> Quaternion:
    return Quaternion(q.s, -q.v)


def norm_sq(q: Quaternion) -> float:
    return q.s * q.s + float(q.v @ q.v)


def norm(q: Quaternion) -> float:
    return float(np.sqrt(norm_sq(q)))


def scalar_part(q: Quaternion) -> float:
    """The [.]_s operator."""
    return q.s


def vec(q: Quaternion) -> Vec3:
    """The [.]_v operator; does not require q to be pure."""
    return q.v


def pure(v: Iterable[float]) -> Quaternion:
    """Identify a 3-vector with the pure quaternion (0, v)."""
    return Quaternion(0.0, np.asarray(v, dtype=np.float64))
