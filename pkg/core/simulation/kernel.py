"""
Compiled Closed-Loop Kernel

Flat-array rendition of the closed loop for the built-in references and
disturbances. Everything here works on plain float64 arrays so numba can
compile it; the object model in core.attitude stays the public API and the
reference the kernel is tested against.

Array layout follows the augmented state [qw, qx, qy, qz, wx, wy, wz, dhx, dhy, dhz].
"""

import math
from typing import NamedTuple, Optional

import numpy as np
import numpy.typing as npt

from core.attitude.dynamics import (
    ConstantDisturbance,
    NoDisturbance,
    SinusoidalDisturbance,
)
from core.attitude.reference import BenchmarkReference, ConstantReference
from core.simulation.scenarios import ControllerMode, ScenarioConfig

Vector = npt.NDArray[np.float64]

MODE_NON_ROBUST = 0
MODE_ROBUST = 1
MODE_OPEN_LOOP = 2

REFERENCE_BENCHMARK = 0
REFERENCE_CONSTANT = 1

DISTURBANCE_NONE = 0
DISTURBANCE_CONSTANT = 1
DISTURBANCE_SINUSOIDAL = 2

_MODES = {
    ControllerMode.NON_ROBUST: MODE_NON_ROBUST,
    ControllerMode.ROBUST: MODE_ROBUST,
    ControllerMode.OPEN_LOOP: MODE_OPEN_LOOP,
}


def numba_njit(func):
    """
    Compile with numba when it is installed, run as plain Python otherwise.

    Compiled functions release the GIL, so sweep threads integrate in parallel.
    """
    try:
        import numba
        return numba.njit(cache=True, nogil=True)(func)
    except ImportError:
        return func


class FlatScenario(NamedTuple):
    """Scenario parameters in the positional order the compiled functions take."""

    inertia: Vector
    inertia_inv: Vector
    gains: Vector  # alpha, k_q, k1, k_omega, k_delta
    mode: int
    reference_kind: int
    reference_q0: Vector
    disturbance_kind: int
    disturbance_vector: Vector
    disturbance_frequency: float
    has_region: bool
    region_c: float
    region_epsilon: float


def flatten_scenario(cfg: ScenarioConfig) -> Optional[FlatScenario]:
    """
    FlatScenario for cfg, or None when the reference or disturbance is only
    available as a Python callable.
    """
    ref = cfg.reference
    if type(ref) is BenchmarkReference:
        reference_kind, q0 = REFERENCE_BENCHMARK, np.array((1.0, 0.0, 0.0, 0.0))
    elif type(ref) is ConstantReference:
        reference_kind, q0 = REFERENCE_CONSTANT, ref.q0.as_array()
    else:
        return None

    dist = cfg.disturbance
    frequency = 0.0
    if type(dist) is NoDisturbance:
        disturbance_kind, vector = DISTURBANCE_NONE, np.zeros(3)
    elif type(dist) is ConstantDisturbance:
        disturbance_kind, vector = DISTURBANCE_CONSTANT, np.array(dist.vector)
    elif type(dist) is SinusoidalDisturbance:
        disturbance_kind, vector = DISTURBANCE_SINUSOIDAL, np.array(dist.vector)
        frequency = dist.frequency
    else:
        return None

    g = cfg.controller_gains
    rg = cfg.robust_gains
    k_delta = rg.k_delta if rg is not None else 0.0
    region = cfg.region
    return FlatScenario(
        inertia=np.array(cfg.inertia.matrix, dtype=np.float64),
        inertia_inv=np.array(cfg.inertia.inverse, dtype=np.float64),
        gains=np.array((g.alpha, g.k_q, g.k1, g.k_omega, k_delta), dtype=np.float64),
        mode=_MODES[cfg.controller_mode],
        reference_kind=reference_kind,
        reference_q0=np.array(q0, dtype=np.float64),
        disturbance_kind=disturbance_kind,
        disturbance_vector=np.array(vector, dtype=np.float64),
        disturbance_frequency=float(frequency),
        has_region=region is not None,
        region_c=float(region.c) if region is not None else 0.0,
        region_epsilon=float(region.epsilon) if region is not None else 0.0,
    )


@numba_njit
def _hamilton(p, q):
    out = np.empty(4)
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + q[0] * p[1] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] + q[0] * p[2] + p[3] * q[1] - p[1] * q[3]
    out[3] = p[0] * q[3] + q[0] * p[3] + p[1] * q[2] - p[2] * q[1]
    return out


@numba_njit
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@numba_njit
def _matvec(m, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = m[i, 0] * v[0] + m[i, 1] * v[1] + m[i, 2] * v[2]
    return out


@numba_njit
def _reference(t, kind, q0_const):
    q0 = np.empty(4)
    w0 = np.zeros(3)
    w0_dot = np.zeros(3)
    if kind == REFERENCE_BENCHMARK:
        c = math.cos(t)
        s = math.sin(t)
        q0[0] = c
        q0[1] = c * s
        q0[2] = s * s
        q0[3] = 0.0
        w0[0] = 2.0 * c * c * c
        w0[1] = (2.0 + 2.0 * c * c) * s
        w0[2] = -2.0 * s * s
        w0_dot[0] = -6.0 * c * c * s
        w0_dot[1] = (-2.0 + 6.0 * c * c) * c
        w0_dot[2] = -4.0 * s * c
    else:
        for i in range(4):
            q0[i] = q0_const[i]
    return q0, w0, w0_dot


@numba_njit
def _disturbance(t, kind, vector, frequency):
    if kind == DISTURBANCE_CONSTANT:
        return vector.copy()
    if kind == DISTURBANCE_SINUSOIDAL:
        return math.cos(frequency * t) * vector
    return np.zeros(3)


@numba_njit
def _evaluate(y, t, inertia, inertia_inv, gains, mode, reference_kind, reference_q0,
              disturbance_kind, disturbance_vector, disturbance_frequency):
    alpha = gains[0]
    k_q = gains[1]
    k1 = gains[2]
    k_omega = gains[3]
    k_delta = gains[4]

    q = y[0:4]
    omega = y[4:7]
    delta_hat = y[7:10]
    q0, w0, w0_dot = _reference(t, reference_kind, reference_q0)

    q0_conj = np.empty(4)
    q0_conj[0] = q0[0]
    q0_conj[1:4] = -q0[1:4]
    e_q = _hamilton(q0_conj, q)
    e_q[0] -= 1.0
    e_omega = omega - w0
    q_norm_sq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]
    a = q_norm_sq - 1.0

    e_qv = e_q[1:4]
    eta_gain = -k_q + 2.0 * alpha * (e_q[0] + a)
    eta = eta_gain * e_qv

    one_plus = e_q.copy()
    one_plus[0] += 1.0
    pure_e_omega = np.zeros(4)
    pure_e_omega[1:4] = e_omega
    e_dot = 0.5 * _hamilton(one_plus, pure_e_omega) - (alpha * a) * one_plus
    e_dot[1:4] += _cross(e_qv, w0)
    eta_dot = eta_gain * e_dot[1:4] + 2.0 * alpha * (e_dot[0] - 2.0 * alpha * a * q_norm_sq) * e_qv

    i_omega = _matvec(inertia, omega)
    gyro = _cross(i_omega, omega)
    tau = np.zeros(3)
    delta_hat_dot = np.zeros(3)
    if mode != MODE_OPEN_LOOP:
        u = -k1 * e_qv - k_omega * (e_omega - eta) + eta_dot + w0_dot
        tau = -gyro + _matvec(inertia, u)
        if mode == MODE_ROBUST:
            tau = tau - delta_hat
            delta_hat_dot = (k_delta / (2.0 * k1)) * _matvec(inertia_inv, e_omega - eta)

    disturbance = _disturbance(t, disturbance_kind, disturbance_vector, disturbance_frequency)

    pure_omega = np.zeros(4)
    pure_omega[1:4] = omega
    derivative = np.empty(10)
    derivative[0:4] = 0.5 * _hamilton(q, pure_omega) - (alpha * a) * q
    derivative[4:7] = _matvec(inertia_inv, gyro + tau + disturbance)
    derivative[7:10] = delta_hat_dot
    return derivative, e_q, e_omega, eta, tau, disturbance, q_norm_sq


@numba_njit
def kernel_derivative(y, t, inertia, inertia_inv, gains, mode, reference_kind, reference_q0,
                      disturbance_kind, disturbance_vector, disturbance_frequency,
                      has_region, region_c, region_epsilon):
    """Augmented closed-loop derivative; same contract as closed_loop_derivative."""
    return _evaluate(y, t, inertia, inertia_inv, gains, mode, reference_kind, reference_q0,
                     disturbance_kind, disturbance_vector, disturbance_frequency)[0]


@numba_njit
def _store(i, y, t, out_t, out_y, out_eq, out_ew, out_tau, out_delta, out_vk1, out_v,
           out_vaux, out_in_m, out_in_s, inertia, inertia_inv, gains, mode, reference_kind,
           reference_q0, disturbance_kind, disturbance_vector, disturbance_frequency,
           has_region, region_c, region_epsilon):
    _, e_q, e_omega, eta, tau, disturbance, q_norm_sq = _evaluate(
        y, t, inertia, inertia_inv, gains, mode, reference_kind, reference_q0,
        disturbance_kind, disturbance_vector, disturbance_frequency,
    )
    w = e_omega - eta
    v_k1 = 0.5 * np.sum(e_q * e_q) + np.sum(w * w) / (4.0 * gains[2])
    v = v_k1
    if mode == MODE_ROBUST:
        e_delta = disturbance - y[7:10]
        v = v_k1 + np.sum(e_delta * e_delta) / (2.0 * gains[4])
    a = q_norm_sq - 1.0

    out_t[i] = t
    out_y[i, :] = y
    out_eq[i, :] = e_q
    out_ew[i, :] = e_omega
    out_tau[i, :] = tau
    out_delta[i, :] = disturbance
    out_vk1[i] = v_k1
    out_v[i] = v
    out_vaux[i] = 0.25 * a * a
    if has_region:
        inside = abs(a) <= region_epsilon
        out_in_m[i] = inside
        out_in_s[i] = inside and v <= region_c


@numba_njit
def integrate(y0, dt, n_steps, stride, inertia, inertia_inv, gains, mode, reference_kind,
              reference_q0, disturbance_kind, disturbance_vector, disturbance_frequency,
              has_region, region_c, region_epsilon):
    """
    Fixed-step RK4 from t = 0 recording every stride steps.

    Returns the record arrays followed by the failing step and state index,
    both -1 when every state stayed finite.
    """
    n = n_steps // stride + 1
    out_t = np.zeros(n)
    out_y = np.zeros((n, 10))
    out_eq = np.zeros((n, 4))
    out_ew = np.zeros((n, 3))
    out_tau = np.zeros((n, 3))
    out_delta = np.zeros((n, 3))
    out_vk1 = np.zeros(n)
    out_v = np.zeros(n)
    out_vaux = np.zeros(n)
    out_in_m = np.zeros(n, dtype=np.bool_)
    out_in_s = np.zeros(n, dtype=np.bool_)

    _store(0, y0, 0.0, out_t, out_y, out_eq, out_ew, out_tau, out_delta, out_vk1, out_v,
           out_vaux, out_in_m, out_in_s, inertia, inertia_inv, gains, mode, reference_kind,
           reference_q0, disturbance_kind, disturbance_vector, disturbance_frequency,
           has_region, region_c, region_epsilon)

    y = y0.copy()
    half = 0.5 * dt
    record = 1
    abort_step = -1
    abort_index = -1
    for k in range(n_steps):
        t = k * dt
        k1 = kernel_derivative(y, t, inertia, inertia_inv, gains, mode, reference_kind,
                               reference_q0, disturbance_kind, disturbance_vector,
                               disturbance_frequency, has_region, region_c, region_epsilon)
        k2 = kernel_derivative(y + half * k1, t + half, inertia, inertia_inv, gains, mode,
                               reference_kind, reference_q0, disturbance_kind,
                               disturbance_vector, disturbance_frequency, has_region,
                               region_c, region_epsilon)
        k3 = kernel_derivative(y + half * k2, t + half, inertia, inertia_inv, gains, mode,
                               reference_kind, reference_q0, disturbance_kind,
                               disturbance_vector, disturbance_frequency, has_region,
                               region_c, region_epsilon)
        k4 = kernel_derivative(y + dt * k3, t + dt, inertia, inertia_inv, gains, mode,
                               reference_kind, reference_q0, disturbance_kind,
                               disturbance_vector, disturbance_frequency, has_region,
                               region_c, region_epsilon)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        for j in range(10):
            if not math.isfinite(y[j]):
                abort_index = j
                break
        if abort_index >= 0:
            abort_step = k + 1
            break

        if (k + 1) % stride == 0:
            _store(record, y, (k + 1) * dt, out_t, out_y, out_eq, out_ew, out_tau, out_delta,
                   out_vk1, out_v, out_vaux, out_in_m, out_in_s, inertia, inertia_inv, gains,
                   mode, reference_kind, reference_q0, disturbance_kind, disturbance_vector,
                   disturbance_frequency, has_region, region_c, region_epsilon)
            record += 1

    return (out_t, out_y, out_eq, out_ew, out_tau, out_delta, out_vk1, out_v, out_vaux,
            out_in_m, out_in_s, abort_step, abort_index)
