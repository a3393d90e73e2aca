"""
Attitude Tracking Control

Tracking error of a body state against a reference sample, the auxiliary
signals eta and eta_dot, the backstepping control law and its robust
variant with an adaptive estimate of a constant disturbance torque, and the
Lyapunov functions and region-membership tests that certify both.

All functions are pure. Diagnostics that need the true disturbance (V and
e_Delta) are only meaningful in a harness where Delta is known.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from core.attitude.dynamics import BodyState, EmbeddingParams, InertiaMatrix
from core.attitude.quat_core import (
    Quaternion,
    Vec3,
    conj,
    cross,
    mul,
    norm_sq,
    pure,
)
from core.exceptions import ConfigError, InfeasibleGainsError

_IDENTITY = Quaternion.identity()

# margin used by feasible_gains to turn the certificate into strict inequalities
FEASIBILITY_MARGIN = 1e-3


def _require_positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"{name} must be strictly positive, got {value}", field=name)


@dataclass(frozen=True)
class ReferenceSample:
    """Reference attitude (unit), angular velocity and its derivative at one instant."""

    q0: Quaternion
    omega0: Vec3
    omega0_dot: Vec3

    def __post_init__(self):
        object.__setattr__(self, "omega0", np.asarray(self.omega0, dtype=np.float64))
        object.__setattr__(self, "omega0_dot", np.asarray(self.omega0_dot, dtype=np.float64))

    def is_unit(self, tol: float = 1e-9) -> bool:
        return abs(math.sqrt(norm_sq(self.q0)) - 1.0) <= tol


class TrackingError(NamedTuple):
    """e_q = q0* q - 1 and e_omega = omega - omega0."""

    e_q: Quaternion
    e_omega: Vec3

    @property
    def e_qs(self) -> float:
        return self.e_q.s

    @property
    def e_qv(self) -> Vec3:
        return self.e_q.v


@dataclass(frozen=True)
class ControllerGains:
    """
    Gains of the non-robust law.

    k_q shapes eta, k1 weights the attitude term of the law and of V_k1,
    k_omega damps e_omega - eta, alpha is the embedding gain.
    """

    alpha: float = 1.0
    k_q: float = 3.0
    k1: float = 3.0
    k_omega: float = 3.0

    def __post_init__(self):
        for name in ("alpha", "k_q", "k1", "k_omega"):
            _require_positive(name, getattr(self, name))

    @property
    def embedding(self) -> EmbeddingParams:
        return EmbeddingParams(self.alpha)


@dataclass(frozen=True)
class RobustGains:
    """Non-robust gains plus the estimator gain k_delta and the bound delta on |Delta| (N m)."""

    base: ControllerGains = field(default_factory=ControllerGains)
    k_delta: float = 1000.0
    delta_bound: float = 0.0

    def __post_init__(self):
        _require_positive("k_delta", self.k_delta)
        if not (self.delta_bound >= 0 and math.isfinite(self.delta_bound)):
            raise ConfigError(
                f"delta_bound must be non-negative, got {self.delta_bound}", field="delta_bound"
            )

    def certifies(self, c: float) -> bool:
        """k_delta > delta^2 / 2c"""
        return self.k_delta > self.delta_bound ** 2 / (2.0 * c)


@dataclass(frozen=True)
class RegionSpec:
    """Constants (c, epsilon) of the certified region of convergence."""

    c: float = 1.0
    epsilon: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.c < 2.0):
            raise ConfigError(f"c must lie in (0, 2), got {self.c}", field="c")
        upper = min(2.0 - math.sqrt(2.0 * self.c), 1.0)
        if not (0.0 <= self.epsilon < upper):
            raise ConfigError(
                f"epsilon must lie in [0, {upper:.6g}) for c={self.c}, got {self.epsilon}",
                field="epsilon",
            )

    @property
    def rho(self) -> float:
        """Decay coefficient 2 - sqrt(2c) - epsilon of the e_qs^2 term."""
        return 2.0 - math.sqrt(2.0 * self.c) - self.epsilon


@dataclass
class EstimatorState:
    """Running disturbance estimate Delta_bar, zero at t = 0."""

    delta_hat: Vec3 = field(default_factory=lambda: np.zeros(3))


class GainSelection(NamedTuple):
    c: float
    k1: float
    k_delta: float


class RegionSelection(NamedTuple):
    region: RegionSpec
    k1: float


def compute_error(state: BodyState, ref: ReferenceSample) -> TrackingError:
    e_q = mul(conj(ref.q0), state.q) - _IDENTITY
    return TrackingError(e_q, state.omega - ref.omega0)


def error_field(
    e: TrackingError,
    omega0: Vec3,
    q_norm_sq: float,
    g: ControllerGains,
) -> Quaternion:
    """
    Attitude error dynamics

        e_q_dot = 1/2 (e_q W0 - W0 e_q) + 1/2 (1 + e_q) e_W - alpha(|q|^2 - 1)(1 + e_q)

    with W0 and e_W taken as pure quaternions.
    """
    e_q = e.e_q
    # e_q W0 - W0 e_q = 2 (e_qv x W0) as a pure quaternion
    commutator = Quaternion(0.0, 2.0 * cross(e_q.v, omega0))
    one_plus = e_q + _IDENTITY
    return (
        0.5 * commutator
        + 0.5 * mul(one_plus, pure(e.e_omega))
        - (g.alpha * (q_norm_sq - 1.0)) * one_plus
    )


def eta(e: TrackingError, q_norm_sq: float, g: ControllerGains) -> Vec3:
    """eta = -k_q e_qv + 2 alpha (e_qs + |q|^2 - 1) e_qv"""
    return (-g.k_q + 2.0 * g.alpha * (e.e_qs + q_norm_sq - 1.0)) * e.e_qv


def eta_dot(
    e: TrackingError,
    omega0: Vec3,
    q_norm_sq: float,
    g: ControllerGains,
) -> Vec3:
    """
    Time derivative of eta from the analytic error dynamics.

    Uses d/dt |q|^2 = -2 alpha (|q|^2 - 1)|q|^2, so no finite differences
    are involved.
    """
    e_dot = error_field(e, omega0, q_norm_sq, g)
    a = q_norm_sq - 1.0
    return (
        (-g.k_q + 2.0 * g.alpha * (e.e_qs + a)) * e_dot.v
        + 2.0 * g.alpha * (e_dot.s - 2.0 * g.alpha * a * q_norm_sq) * e.e_qv
    )


def _backstepping_input(
    e: TrackingError, ref: ReferenceSample, q_norm_sq: float, g: ControllerGains
) -> Vec3:
    """Commanded body acceleration -k1 e_qv - k_W (e_W - eta) + eta_dot + W0_dot."""
    eta_val = eta(e, q_norm_sq, g)
    return (
        -g.k1 * e.e_qv
        - g.k_omega * (e.e_omega - eta_val)
        + eta_dot(e, ref.omega0, q_norm_sq, g)
        + ref.omega0_dot
    )


def control_torque(
    state: BodyState,
    ref: ReferenceSample,
    g: ControllerGains,
    inertia: InertiaMatrix,
    *,
    error: Optional[TrackingError] = None,
) -> Vec3:
    """
    Exponentially stabilizing tracking law

        tau = -(I W) x W + I(-k1 e_qv - k_W (e_W - eta) + eta_dot + W0_dot)

    A precomputed tracking error for (state, ref) may be passed in.
    """
    e = error if error is not None else compute_error(state, ref)
    u = _backstepping_input(e, ref, norm_sq(state.q), g)
    omega = state.omega
    return -cross(inertia.apply(omega), omega) + inertia.apply(u)


def robust_control_torque(
    state: BodyState,
    ref: ReferenceSample,
    rg: RobustGains,
    est: EstimatorState,
    inertia: InertiaMatrix,
    *,
    error: Optional[TrackingError] = None,
) -> Vec3:
    """control_torque minus the current disturbance estimate Delta_bar."""
    return control_torque(state, ref, rg.base, inertia, error=error) - est.delta_hat


def estimator_derivative(
    e: TrackingError,
    eta_val: Vec3,
    rg: RobustGains,
    inertia: InertiaMatrix,
) -> Vec3:
    """Delta_bar_dot = k_delta / (2 k1) I^-1 (e_W - eta)"""
    return (rg.k_delta / (2.0 * rg.base.k1)) * inertia.solve(e.e_omega - eta_val)


def closed_loop_error_omega_dot(
    state: BodyState,
    ref: ReferenceSample,
    tau: Vec3,
    inertia: InertiaMatrix,
    disturbance_value: Vec3,
) -> Vec3:
    """e_W_dot = I^-1((I W) x W + tau + Delta) - W0_dot for an arbitrary applied torque."""
    omega = state.omega
    omega_dot = inertia.solve(cross(inertia.apply(omega), omega) + tau + disturbance_value)
    return omega_dot - ref.omega0_dot


def lyapunov_V0(e: TrackingError) -> float:
    return 0.5 * norm_sq(e.e_q)


def lyapunov_Vk1(e: TrackingError, q_norm_sq: float, g: ControllerGains) -> float:
    """V_k1 = 1/2 |e_q|^2 + 1/(4 k1) |e_W - eta|^2"""
    w = e.e_omega - eta(e, q_norm_sq, g)
    return 0.5 * norm_sq(e.e_q) + float(w @ w) / (4.0 * g.k1)


def lyapunov_V(e: TrackingError, q_norm_sq: float, rg: RobustGains, e_delta: Vec3) -> float:
    """V = V_k1 + 1/(2 k_delta) |e_delta|^2; e_delta = Delta - Delta_bar is known only to a test harness."""
    e_delta = np.asarray(e_delta, dtype=np.float64)
    return lyapunov_Vk1(e, q_norm_sq, rg.base) + float(e_delta @ e_delta) / (2.0 * rg.k_delta)


def v_aux(q: Quaternion) -> float:
    """V_aux = 1/4 (|q|^2 - 1)^2"""
    return 0.25 * (norm_sq(q) - 1.0) ** 2


def v_aux_dot(q: Quaternion, alpha: float) -> float:
    """d/dt V_aux = -alpha (|q|^2 - 1)^2 |q|^2 along the embedded dynamics."""
    v = norm_sq(q)
    return -alpha * (v - 1.0) ** 2 * v


def v0_dot_expression(e: TrackingError, q_norm_sq: float, g: ControllerGains) -> float:
    """
    Closed form of dV0/dt along the embedded dynamics (unit reference):

        -alpha(2 + e_qs + |q|^2 - 1) e_qs^2 + 1/2 <e_qv, e_W - 2 alpha(e_qs + |q|^2 - 1) e_qv>
    """
    a = q_norm_sq - 1.0
    s = e.e_qs
    ev = e.e_qv
    return -g.alpha * (2.0 + s + a) * s * s + 0.5 * float(
        ev @ (e.e_omega - 2.0 * g.alpha * (s + a) * ev)
    )


def decrease_bound(
    e: TrackingError,
    q_norm_sq: float,
    g: ControllerGains,
    region: RegionSpec,
) -> float:
    """
    Certified upper bound on dV_k1/dt (and on dV/dt under the robust law) inside the region:

        -alpha rho e_qs^2 - k_q/2 |e_qv|^2 - k_W/(2 k1) |e_W - eta|^2
    """
    w = e.e_omega - eta(e, q_norm_sq, g)
    ev = e.e_qv
    return (
        -g.alpha * region.rho * e.e_qs ** 2
        - 0.5 * g.k_q * float(ev @ ev)
        - g.k_omega / (2.0 * g.k1) * float(w @ w)
    )


def in_M_epsilon(q: Quaternion, epsilon: float) -> bool:
    """| |q|^2 - 1 | <= epsilon, i.e. V_aux <= epsilon^2 / 4."""
    return abs(norm_sq(q) - 1.0) <= epsilon


def in_region_S(
    state: BodyState,
    e: TrackingError,
    spec: RegionSpec,
    g: ControllerGains,
) -> bool:
    q_norm_sq = norm_sq(state.q)
    return abs(q_norm_sq - 1.0) <= spec.epsilon and lyapunov_Vk1(e, q_norm_sq, g) <= spec.c


def in_region_S_robust(
    state: BodyState,
    e: TrackingError,
    e_delta: Vec3,
    spec: RegionSpec,
    rg: RobustGains,
) -> bool:
    q_norm_sq = norm_sq(state.q)
    return abs(q_norm_sq - 1.0) <= spec.epsilon and lyapunov_V(e, q_norm_sq, rg, e_delta) <= spec.c


def _unit_attitude_norm_sq(e0: TrackingError) -> float:
    # |q|^2 = 1 + 2 e_qs + |e_q|^2 holds whenever q0 is a unit quaternion
    return 1.0 + 2.0 * e0.e_qs + norm_sq(e0.e_q)


def feasible_gains(e0: TrackingError, delta_bound: float, g0: ControllerGains) -> GainSelection:
    """
    Pick (c, k1, k_delta) so that a given initial error of a unit attitude is certified:

        1/(4 k1) |e_W(0) - eta(0)|^2 + delta^2 / (2 k_delta) < c - 1/2 |e_q(0)|^2
        k_delta > delta^2 / (2c)

    c is the midpoint of (|e_q(0)|^2 / 2, 2); k1 never drops below g0.k1.
    Raises InfeasibleGainsError when |e_q(0)| >= 2.
    """
    eq_sq = norm_sq(e0.e_q)
    if not eq_sq < 4.0:
        raise InfeasibleGainsError(
            f"|e_q(0)| = {math.sqrt(eq_sq):.6g} >= 2: the antipodal attitude cannot be certified"
        )
    if delta_bound < 0:
        raise ConfigError(f"delta_bound must be non-negative, got {delta_bound}", field="delta_bound")

    half_eq = 0.5 * eq_sq
    c = 0.5 * (half_eq + 2.0)
    budget = c - half_eq
    margin = min(FEASIBILITY_MARGIN, 0.5 * budget)

    eta0 = eta(e0, _unit_attitude_norm_sq(e0), g0)
    w = e0.e_omega - eta0
    w_sq = float(w @ w)
    k1 = max(g0.k1, w_sq / (2.0 * budget - 2.0 * margin))

    remaining = budget - w_sq / (4.0 * k1)
    if delta_bound == 0.0:
        k_delta = 1.0
    else:
        k_delta = delta_bound ** 2 / (2.0 * remaining - margin)
        floor = delta_bound ** 2 / (2.0 * c)
        if not k_delta > floor:
            k_delta = float(np.nextafter(floor, math.inf))
    return GainSelection(c=c, k1=k1, k_delta=k_delta)


def feasible_region(e0: TrackingError, g0: ControllerGains) -> RegionSelection:
    """
    Non-robust counterpart of feasible_gains: a region S_{eps,c,k1} that
    contains a unit-attitude initial state with |e_q(0)| < 2.

    Uses epsilon = 0, c the midpoint of (|e_q(0)|^2 / 2, 2) and the smallest
    k1 >= g0.k1 with V_k1(0) < c.
    """
    eq_sq = norm_sq(e0.e_q)
    if not eq_sq < 4.0:
        raise InfeasibleGainsError(
            f"|e_q(0)| = {math.sqrt(eq_sq):.6g} >= 2: the antipodal attitude cannot be certified"
        )
    half_eq = 0.5 * eq_sq
    c = 0.5 * (half_eq + 2.0)
    budget = c - half_eq
    margin = min(FEASIBILITY_MARGIN, 0.5 * budget)
    w = e0.e_omega - eta(e0, _unit_attitude_norm_sq(e0), g0)
    k1 = max(g0.k1, float(w @ w) / (4.0 * (budget - margin)))
    return RegionSelection(region=RegionSpec(c=c, epsilon=0.0), k1=k1)
