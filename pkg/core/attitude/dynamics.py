"""
Rigid-Body Attitude Dynamics

Vector fields for a fully actuated rigid body: the unit-quaternion model on
S^3 x R^3, its stable embedding into H x R^3 (the unit sphere becomes an
exponentially attracting invariant set) and the variant with an external
disturbance torque.

Fields are pure functions of the state; integration lives in
core.simulation.sim_engine.
"""

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np
import numpy.typing as npt

from core.attitude.quat_core import (
    Quaternion,
    Vec3,
    as_vec3,
    cross,
    mul,
    norm_sq,
    pure,
)
from core.exceptions import ConfigError

_SYMMETRY_TOL = 1e-12


class InertiaMatrix:
    """
    Symmetric positive-definite moment of inertia (kg m^2).

    The inverse is computed once from the Cholesky factor; construction fails
    with ConfigError when the matrix is not symmetric or not positive definite.
    """

    __slots__ = ("_matrix", "_inverse")

    def __init__(self, matrix: Iterable[Iterable[float]]):
        m = np.array(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ConfigError(f"inertia must be 3x3, got shape {m.shape}", field="inertia")
        if not np.all(np.isfinite(m)):
            raise ConfigError("inertia contains non-finite entries", field="inertia")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > _SYMMETRY_TOL * scale:
            raise ConfigError("inertia matrix is not symmetric", field="inertia")
        try:
            lower = np.linalg.cholesky(m)
        except np.linalg.LinAlgError as e:
            raise ConfigError("inertia matrix is not positive definite", field="inertia") from e
        lower_inv = np.linalg.inv(lower)
        inverse = lower_inv.T @ lower_inv
        m.setflags(write=False)
        inverse.setflags(write=False)
        self._matrix = m
        self._inverse = inverse

    @classmethod
    def diagonal(cls, ixx: float, iyy: float, izz: float) -> "InertiaMatrix":
        return cls(np.diag((ixx, iyy, izz)))

    @property
    def matrix(self) -> npt.NDArray[np.float64]:
        return self._matrix

    @property
    def inverse(self) -> npt.NDArray[np.float64]:
        return self._inverse

    def apply(self, v: Vec3) -> Vec3:
        """I v"""
        return self._matrix @ v

    def solve(self, v: Vec3) -> Vec3:
        """I^-1 v"""
        return self._inverse @ v

    def __repr__(self) -> str:
        return f"InertiaMatrix({self._matrix.tolist()})"


@dataclass(frozen=True)
class EmbeddingParams:
    """Gain of the restoring term -alpha(|q|^2 - 1)q, in 1/s."""

    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be positive, got {self.alpha}", field="alpha")


@dataclass(frozen=True)
class BodyState:
    """Attitude quaternion (ambient H) and body-fixed angular velocity in rad/s."""

    q: Quaternion
    omega: Vec3

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=np.float64))

    def is_finite(self) -> bool:
        return self.q.is_finite() and bool(np.all(np.isfinite(self.omega)))


class StateDerivative(NamedTuple):
    q_dot: Quaternion
    omega_dot: Vec3


class DisturbanceModel:
    """External torque Delta(t) in N m acting on the body."""

    #: True when Delta does not depend on time
    is_constant: bool = True

    def evaluate(self, t: float) -> Vec3:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class NoDisturbance(DisturbanceModel):
    def evaluate(self, t: float) -> Vec3:
        return np.zeros(3)

    def describe(self) -> dict:
        return {"type": "none"}


class ConstantDisturbance(DisturbanceModel):
    def __init__(self, vector: Iterable[float]):
        self.vector = as_vec3(vector)
        self.vector.setflags(write=False)

    def evaluate(self, t: float) -> Vec3:
        return self.vector

    def describe(self) -> dict:
        return {"type": "constant", "vector": self.vector.tolist()}


class TimeVaryingDisturbance(DisturbanceModel):
    """Arbitrary Delta(t); the callable must be finite for all t >= 0."""

    is_constant = False

    def __init__(self, fn: Callable[[float], Iterable[float]], label: str = "custom"):
        self._fn = fn
        self.label = label

    def evaluate(self, t: float) -> Vec3:
        return as_vec3(self._fn(t))

    def describe(self) -> dict:
        return {"type": "time_varying", "label": self.label}


class SinusoidalDisturbance(TimeVaryingDisturbance):
    """Delta(t) = cos(frequency t) * vector"""

    def __init__(self, vector: Iterable[float], frequency: float):
        self.vector = as_vec3(vector)
        self.frequency = float(frequency)
        super().__init__(self._evaluate, label="sinusoidal")

    def _evaluate(self, t: float) -> Vec3:
        return math.cos(self.frequency * t) * self.vector

    def evaluate(self, t: float) -> Vec3:
        return self._evaluate(t)

    def describe(self) -> dict:
        return {"type": "sinusoidal", "vector": self.vector.tolist(), "frequency": self.frequency}


def rigid_field(state: BodyState, tau: Vec3, inertia: InertiaMatrix) -> StateDerivative:
    """
    Rigid-body equations on S^3 x R^3.

        q_dot     = 1/2 q Omega
        omega_dot = I^-1 ((I Omega) x Omega) + I^-1 tau
    """
    omega = state.omega
    q_dot = 0.5 * mul(state.q, pure(omega))
    omega_dot = inertia.solve(cross(inertia.apply(omega), omega) + tau)
    return StateDerivative(q_dot, omega_dot)


def embedded_field(
    state: BodyState,
    tau: Vec3,
    inertia: InertiaMatrix,
    params: EmbeddingParams,
) -> StateDerivative:
    """
    Stable extension of rigid_field to H x R^3.

    Adds -alpha(|q|^2 - 1)q to q_dot; on the unit sphere the extra term is
    exactly zero, so the output coincides with rigid_field there.
    """
    rigid = rigid_field(state, tau, inertia)
    restoring = params.alpha * (norm_sq(state.q) - 1.0)
    if restoring == 0.0:
        return rigid
    return StateDerivative(rigid.q_dot - restoring * state.q, rigid.omega_dot)


def disturbed_embedded_field(
    state: BodyState,
    tau: Vec3,
    inertia: InertiaMatrix,
    params: EmbeddingParams,
    disturbance: DisturbanceModel,
    t: float,
) -> StateDerivative:
    """embedded_field with the disturbance torque Delta(t) added to tau."""
    return embedded_field(state, tau + disturbance.evaluate(t), inertia, params)


def norm_sq_drift(q: Quaternion, alpha: float) -> float:
    """d/dt |q|^2 = -2 alpha (|q|^2 - 1)|q|^2 along embedded_field, for any Omega and tau."""
    v = norm_sq(q)
    return -2.0 * alpha * (v - 1.0) * v


def norm_sq_closed_form(t: float, v0: float, alpha: float) -> float:
    """
    Separable solution of dV/dt = -2 alpha (V - 1) V:

        V(t) = 1 / (1 + (1/V0 - 1) exp(-2 alpha t))
    """
    if v0 == 0.0:
        return 0.0
    return 1.0 / (1.0 + (1.0 / v0 - 1.0) * math.exp(-2.0 * alpha * t))
