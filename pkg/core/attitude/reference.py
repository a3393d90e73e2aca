"""
Reference Trajectories

A reference trajectory maps t >= 0 to a ReferenceSample (q0, W0, W0_dot)
and must satisfy the kinematics q0_dot = 1/2 q0 W0 on the unit sphere.
consistency_residual measures how well a trajectory honours that contract.
"""

import math
from typing import Callable, Iterable, Optional

import numpy as np

from core.attitude.quat_core import Quaternion, Vec3, as_vec3, conj, mul, norm
from core.attitude.tracking import ReferenceSample
from core.exceptions import ConfigError

FD_STEP = 1e-6

# allowed deviation of |q0| from 1 for a fixed reference attitude
UNIT_NORM_TOL = 1e-9


class ReferenceTrajectory:
    """Deterministic, side-effect free mapping t -> ReferenceSample."""

    name: str = "reference"

    def sample(self, t: float) -> ReferenceSample:
        raise NotImplementedError

    def __call__(self, t: float) -> ReferenceSample:
        return self.sample(t)


def benchmark_reference(t: float) -> ReferenceSample:
    """
    Analytic benchmark trajectory

        q0       = (cos t, (cos t sin t, sin^2 t, 0))
        W0       = (2 cos^3 t, (2 + 2 cos^2 t) sin t, -2 sin^2 t)
        W0_dot   = (-6 cos^2 t sin t, (-2 + 6 cos^2 t) cos t, -4 sin t cos t)
    """
    c = math.cos(t)
    s = math.sin(t)
    q0 = Quaternion(c, np.array((c * s, s * s, 0.0)))
    omega0 = np.array((2.0 * c ** 3, (2.0 + 2.0 * c * c) * s, -2.0 * s * s))
    omega0_dot = np.array((-6.0 * c * c * s, (-2.0 + 6.0 * c * c) * c, -4.0 * s * c))
    return ReferenceSample(q0, omega0, omega0_dot)


class BenchmarkReference(ReferenceTrajectory):
    name = "benchmark"

    def sample(self, t: float) -> ReferenceSample:
        return benchmark_reference(t)


class ConstantReference(ReferenceTrajectory):
    """Fixed attitude at rest."""

    name = "constant"

    def __init__(self, q0: Optional[Quaternion] = None):
        self.q0 = q0 if q0 is not None else Quaternion.identity()
        if not self.q0.is_finite() or abs(norm(self.q0) - 1.0) > UNIT_NORM_TOL:
            raise ConfigError(
                f"reference attitude must be a unit quaternion, got |q0| = {norm(self.q0):.12g}",
                field="q0",
            )
        self._sample = ReferenceSample(self.q0, np.zeros(3), np.zeros(3))

    def sample(self, t: float) -> ReferenceSample:
        return self._sample


class FunctionReference(ReferenceTrajectory):
    """
    Reference assembled from callables.

    When omega0_dot is not supplied it is recovered by omega_dot_fallback.
    """

    name = "function"

    def __init__(
        self,
        q0: Callable[[float], Quaternion],
        omega0: Callable[[float], Iterable[float]],
        omega0_dot: Optional[Callable[[float], Iterable[float]]] = None,
    ):
        self._q0 = q0
        self._omega0 = omega0
        self._omega0_dot = omega0_dot

    def attitude(self, t: float) -> Quaternion:
        return self._q0(t)

    def angular_velocity(self, t: float) -> Vec3:
        return as_vec3(self._omega0(t))

    def sample(self, t: float) -> ReferenceSample:
        if self._omega0_dot is not None:
            omega0_dot = as_vec3(self._omega0_dot(t))
        else:
            omega0_dot = _central_difference(self.angular_velocity, t)
        return ReferenceSample(self.attitude(t), self.angular_velocity(t), omega0_dot)


def _central_difference(fn: Callable[[float], Vec3], t: float, h: float = FD_STEP) -> Vec3:
    return (fn(t + h) - fn(t - h)) / (2.0 * h)


def omega_dot_fallback(ref: ReferenceTrajectory, t: float, h: float = FD_STEP) -> Vec3:
    """Central difference of W0, O(h^2) accurate."""
    return _central_difference(lambda tau: ref.sample(tau).omega0, t, h)


def consistency_residual(ref: ReferenceTrajectory, t: float, h: float = FD_STEP) -> float:
    """
    |[2 q0* q0_dot]_v - W0| + |[2 q0* q0_dot]_s| with q0_dot by central difference.

    Zero up to differencing noise when q0_dot = 1/2 q0 W0. Requires t >= h.
    """
    q_plus = ref.sample(t + h).q0
    q_minus = ref.sample(t - h).q0
    q_dot = (1.0 / (2.0 * h)) * (q_plus - q_minus)
    sample = ref.sample(t)
    implied = 2.0 * mul(conj(sample.q0), q_dot)
    return float(np.linalg.norm(implied.v - sample.omega0)) + abs(implied.s)


def unit_norm_residual(ref: ReferenceTrajectory, t: float) -> float:
    return abs(norm(ref.sample(t).q0) - 1.0)
