"""
Closed-Loop Simulation Engine

Fixed-step classical Runge-Kutta integration of the augmented closed-loop
state (q, Omega, Delta_bar), trace recording with region monitors, and run
metrics.

The attitude is never renormalized: the embedding term of the extended
dynamics is what keeps |q| on the unit sphere.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from core.attitude.dynamics import BodyState, disturbed_embedded_field
from core.attitude.quat_core import Quaternion, Vec3, norm_sq
from core.attitude.tracking import (
    EstimatorState,
    ReferenceSample,
    TrackingError,
    compute_error,
    control_torque,
    estimator_derivative,
    eta,
    in_M_epsilon,
    in_region_S,
    in_region_S_robust,
    lyapunov_V,
    lyapunov_Vk1,
    robust_control_torque,
    v_aux,
)
from core.exceptions import NumericalAbortError
from core.simulation.kernel import FlatScenario, flatten_scenario, integrate
from core.simulation.scenarios import ControllerMode, ScenarioConfig

logger = logging.getLogger(__name__)

STATE_COMPONENTS = ("qw", "qx", "qy", "qz", "wx", "wy", "wz", "dhx", "dhy", "dhz")
STATE_SIZE = len(STATE_COMPONENTS)

# absolute slack when counting increases of the monitored Lyapunov function
MONOTONICITY_ATOL = 1e-12
MONOTONICITY_RTOL = 1e-9

Vector = npt.NDArray[np.float64]
Field = Callable[[float, Vector], Vector]


class LoopSnapshot(NamedTuple):
    """Everything the closed loop computes at one (state, t)."""

    t: float
    state: BodyState
    delta_hat: Vec3
    reference: ReferenceSample
    error: TrackingError
    q_norm_sq: float
    eta: Vec3
    tau: Vec3
    disturbance: Vec3
    derivative: Vector


def split_state(aug_state: Vector) -> Tuple[BodyState, Vec3]:
    q = Quaternion(aug_state[0], aug_state[1:4])
    return BodyState(q, aug_state[4:7]), aug_state[7:10]


def evaluate_loop(aug_state: Vector, t: float, cfg: ScenarioConfig) -> LoopSnapshot:
    """Reference, tracking error, control torque and augmented derivative at time t."""
    state, delta_hat = split_state(aug_state)
    ref = cfg.reference.sample(t)
    e = compute_error(state, ref)
    q_norm_sq = norm_sq(state.q)
    g = cfg.controller_gains
    eta_val = eta(e, q_norm_sq, g)

    mode = cfg.controller_mode
    if mode is ControllerMode.ROBUST:
        rg = cfg.robust_gains
        tau = robust_control_torque(
            state, ref, rg, EstimatorState(delta_hat), cfg.inertia, error=e
        )
        delta_hat_dot = estimator_derivative(e, eta_val, rg, cfg.inertia)
    elif mode is ControllerMode.NON_ROBUST:
        tau = control_torque(state, ref, g, cfg.inertia, error=e)
        delta_hat_dot = np.zeros(3)
    else:
        tau = np.zeros(3)
        delta_hat_dot = np.zeros(3)

    disturbance = cfg.disturbance.evaluate(t)
    plant = disturbed_embedded_field(
        state, tau, cfg.inertia, cfg.embedding, cfg.disturbance, t
    )
    derivative = np.concatenate(
        ((plant.q_dot.s,), plant.q_dot.v, plant.omega_dot, delta_hat_dot)
    )
    return LoopSnapshot(
        t, state, delta_hat, ref, e, q_norm_sq, eta_val, tau, disturbance, derivative
    )


def closed_loop_derivative(aug_state: Vector, t: float, cfg: ScenarioConfig) -> Vector:
    """Derivative of (q, Omega, Delta_bar) under the configured law and disturbance."""
    return evaluate_loop(aug_state, t, cfg).derivative


def rk4_increment(fun: Field, t: float, y: Vector, dt: float) -> Vector:
    """One classical Runge-Kutta step of y' = fun(t, y)."""
    half = 0.5 * dt
    k1 = fun(t, y)
    k2 = fun(t + half, y + half * k1)
    k3 = fun(t + half, y + half * k2)
    k4 = fun(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(y: Vector, t: float, step: int) -> None:
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        component = STATE_COMPONENTS[bad] if len(y) == STATE_SIZE else f"y[{bad}]"
        _abort(t, step, component)


def _abort(t: float, step: int, component: str) -> None:
    logger.error("Numerical abort at step %d (t=%.6g s): %s is not finite", step, t, component)
    raise NumericalAbortError(t=t, step=step, component=component)


def rk4_step(aug_state: Vector, t: float, dt: float, cfg: ScenarioConfig, step: int = 0) -> Vector:
    """Advance the augmented closed-loop state by dt; raises NumericalAbortError on NaN/Inf."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    with np.errstate(over="ignore", invalid="ignore"):
        y = rk4_increment(lambda s, x: closed_loop_derivative(x, s, cfg), t, aug_state, dt)
    _check_finite(y, t + dt, step)
    return y


@dataclass
class SimulationTrace:
    """Time-indexed record of a run; array rows are recorded samples."""

    t: Vector
    q: Vector
    omega: Vector
    e_q: Vector
    e_omega: Vector
    delta_hat: Vector
    delta: Vector
    tau: Vector
    v_k1: Vector
    v_lyapunov: Vector
    v_aux: Vector
    in_m_epsilon: Optional[npt.NDArray[np.bool_]] = None
    in_region: Optional[npt.NDArray[np.bool_]] = None

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def allocate(cls, n: int, with_regions: bool) -> "SimulationTrace":
        return cls(
            t=np.empty(n),
            q=np.empty((n, 4)),
            omega=np.empty((n, 3)),
            e_q=np.empty((n, 4)),
            e_omega=np.empty((n, 3)),
            delta_hat=np.empty((n, 3)),
            delta=np.empty((n, 3)),
            tau=np.empty((n, 3)),
            v_k1=np.empty(n),
            v_lyapunov=np.empty(n),
            v_aux=np.empty(n),
            in_m_epsilon=np.zeros(n, dtype=bool) if with_regions else None,
            in_region=np.zeros(n, dtype=bool) if with_regions else None,
        )

    @property
    def eq_norm(self) -> Vector:
        return np.linalg.norm(self.e_q, axis=1)

    @property
    def ew_norm(self) -> Vector:
        return np.linalg.norm(self.e_omega, axis=1)

    @property
    def delta_error(self) -> Vector:
        """e_Delta = Delta(t) - Delta_bar(t)"""
        return self.delta - self.delta_hat

    @property
    def s3_drift(self) -> Vector:
        return np.abs(np.linalg.norm(self.q, axis=1) - 1.0)

    def final_state(self) -> Vector:
        return np.concatenate((self.q[-1], self.omega[-1], self.delta_hat[-1]))


@dataclass
class RunMetrics:
    final_eq_norm: float
    final_eomega_norm: float
    final_delta_err_norm: float
    rms_eomega: Optional[float]
    rms_window: Tuple[float, float]
    settle_time_eq: Optional[float]
    settle_threshold: float
    vk1_monotonicity_violations: int
    max_s3_drift: float
    region_entry_time: Optional[float] = None
    region_violations: int = 0
    m_epsilon_violations: int = 0


def _record(trace: SimulationTrace, i: int, snap: LoopSnapshot, cfg: ScenarioConfig) -> None:
    e = snap.error
    trace.t[i] = snap.t
    trace.q[i] = snap.state.q.as_array()
    trace.omega[i] = snap.state.omega
    trace.e_q[i] = e.e_q.as_array()
    trace.e_omega[i] = e.e_omega
    trace.delta_hat[i] = snap.delta_hat
    trace.delta[i] = snap.disturbance
    trace.tau[i] = snap.tau
    trace.v_k1[i] = lyapunov_Vk1(e, snap.q_norm_sq, cfg.controller_gains)
    rg = cfg.robust_gains
    if cfg.controller_mode is ControllerMode.ROBUST:
        trace.v_lyapunov[i] = lyapunov_V(e, snap.q_norm_sq, rg, snap.disturbance - snap.delta_hat)
    else:
        trace.v_lyapunov[i] = trace.v_k1[i]
    trace.v_aux[i] = v_aux(snap.state.q)

    if cfg.region is not None:
        trace.in_m_epsilon[i] = in_M_epsilon(snap.state.q, cfg.region.epsilon)
        if cfg.controller_mode is ControllerMode.ROBUST:
            trace.in_region[i] = in_region_S_robust(
                snap.state, e, snap.disturbance - snap.delta_hat, cfg.region, rg
            )
        else:
            trace.in_region[i] = in_region_S(snap.state, e, cfg.region, cfg.controller_gains)


def _invariance_violations(flags: npt.NDArray[np.bool_]) -> Tuple[Optional[int], int]:
    """Index of first entry and number of samples outside the set afterwards."""
    inside = np.flatnonzero(flags)
    if len(inside) == 0:
        return None, 0
    first = int(inside[0])
    return first, int(np.count_nonzero(~flags[first:]))


def _monotonicity_violations(values: Vector) -> int:
    rise = np.diff(values)
    allowed = MONOTONICITY_ATOL + MONOTONICITY_RTOL * np.abs(values[:-1])
    return int(np.count_nonzero(rise > allowed))


def compute_metrics(
    trace: SimulationTrace,
    window: Tuple[float, float] = (20.0, 40.0),
    settle_threshold: float = 1e-2,
) -> RunMetrics:
    """
    Summary metrics of a trace.

    The Lyapunov monotonicity count uses V_k1 for the non-robust law and the
    full V (with the true disturbance error) for the robust law, starting at
    the first sample inside the certified region when one is monitored.
    """
    eq_norm = trace.eq_norm
    ew_norm = trace.ew_norm

    in_window = (trace.t >= window[0] - 1e-12) & (trace.t <= window[1] + 1e-12)
    rms = float(np.sqrt(np.mean(ew_norm[in_window] ** 2))) if np.any(in_window) else None

    above = np.flatnonzero(eq_norm >= settle_threshold)
    if len(above) == 0:
        settle = float(trace.t[0])
    elif above[-1] == len(trace) - 1:
        settle = None
    else:
        settle = float(trace.t[above[-1] + 1])

    entry_time = None
    region_violations = 0
    m_eps_violations = 0
    start = 0
    if trace.in_region is not None:
        first, region_violations = _invariance_violations(trace.in_region)
        _, m_eps_violations = _invariance_violations(trace.in_m_epsilon)
        if first is not None:
            entry_time = float(trace.t[first])
            start = first
        else:
            start = len(trace)

    return RunMetrics(
        final_eq_norm=float(eq_norm[-1]),
        final_eomega_norm=float(ew_norm[-1]),
        final_delta_err_norm=float(np.linalg.norm(trace.delta_error[-1])),
        rms_eomega=rms,
        rms_window=window,
        settle_time_eq=settle,
        settle_threshold=settle_threshold,
        vk1_monotonicity_violations=_monotonicity_violations(trace.v_lyapunov[start:])
        if len(trace) - start > 1
        else 0,
        max_s3_drift=float(np.max(trace.s3_drift)),
        region_entry_time=entry_time,
        region_violations=region_violations,
        m_epsilon_violations=m_eps_violations,
    )


def _run_kernel(cfg: ScenarioConfig, flat: FlatScenario, y0: Vector) -> tuple:
    with np.errstate(over="ignore", invalid="ignore"):
        return integrate(y0, cfg.dt, cfg.n_steps, cfg.record_stride, *flat)


def _fill_from_kernel(cfg: ScenarioConfig, flat: FlatScenario, y0: Vector) -> SimulationTrace:
    (t, y, e_q, e_omega, tau, delta, v_k1, v, v_aux_values,
     in_m, in_s, abort_step, abort_index) = _run_kernel(cfg, flat, y0)
    if abort_step >= 0:
        _abort(abort_step * cfg.dt, int(abort_step), STATE_COMPONENTS[abort_index])
    return SimulationTrace(
        t=t,
        q=y[:, 0:4],
        omega=y[:, 4:7],
        e_q=e_q,
        e_omega=e_omega,
        delta_hat=y[:, 7:10],
        delta=delta,
        tau=tau,
        v_k1=v_k1,
        v_lyapunov=v,
        v_aux=v_aux_values,
        in_m_epsilon=in_m if flat.has_region else None,
        in_region=in_s if flat.has_region else None,
    )


def _fill_from_python(cfg: ScenarioConfig, y: Vector) -> SimulationTrace:
    trace = SimulationTrace.allocate(cfg.n_records, with_regions=cfg.region is not None)
    _record(trace, 0, evaluate_loop(y, 0.0, cfg), cfg)
    fun = lambda s, x: closed_loop_derivative(x, s, cfg)  # noqa: E731
    record = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.n_steps):
            y = rk4_increment(fun, k * cfg.dt, y, cfg.dt)
            _check_finite(y, (k + 1) * cfg.dt, k + 1)
            if (k + 1) % cfg.record_stride == 0:
                _record(trace, record, evaluate_loop(y, (k + 1) * cfg.dt, cfg), cfg)
                record += 1
    return trace


def simulate(cfg: ScenarioConfig, *, compiled: bool = True) -> Tuple[SimulationTrace, RunMetrics]:
    """
    Integrate the closed loop from t = 0 to t_end, recording every
    record_stride steps. Deterministic for a given configuration.

    Built-in references and disturbances run through the compiled kernel;
    callables, or compiled=False, take the object-level path.
    """
    logger.info(
        "Simulating %s: mode=%s dt=%g t_end=%g steps=%d",
        cfg.name, cfg.controller_mode.value, cfg.dt, cfg.t_end, cfg.n_steps,
    )
    if cfg.starts_outside_embedding_region():
        logger.warning("Initial attitude is the zero quaternion; |q| cannot converge to 1 from there")

    y = cfg.initial_state_vector()
    _check_finite(y, 0.0, 0)
    flat = flatten_scenario(cfg) if compiled else None
    if flat is not None:
        trace = _fill_from_kernel(cfg, flat, y)
    else:
        logger.debug("%s uses a Python reference or disturbance; integrating without the kernel", cfg.name)
        trace = _fill_from_python(cfg, y)

    if trace.in_region is not None:
        if not trace.in_region[0]:
            logger.warning("%s starts outside the certified region of convergence", cfg.name)
            inside = np.flatnonzero(trace.in_region)
            if len(inside):
                logger.info("%s entered the certified region at t=%.3f s", cfg.name, trace.t[inside[0]])

    metrics = compute_metrics(trace)
    logger.info(
        "Finished %s: |e_q|=%.3e |e_W|=%.3e |e_D|=%.3e",
        cfg.name, metrics.final_eq_norm, metrics.final_eomega_norm, metrics.final_delta_err_norm,
    )
    return trace, metrics


def convergence_order(cfg: ScenarioConfig, dts: Sequence[float]) -> float:
    """
    Observed order of accuracy from three runs with successively halved steps:

        log2(|y(h) - y(h/2)| / |y(h/2) - y(h/4)|)
    """
    if len(dts) != 3:
        raise ValueError("convergence_order needs exactly three step sizes")
    finals = []
    for dt in dts:
        run_cfg = _replace_dt(cfg, dt)
        trace, _ = simulate(run_cfg)
        finals.append(trace.final_state())
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    return float(math.log2(coarse / fine))


def _replace_dt(cfg: ScenarioConfig, dt: float) -> ScenarioConfig:
    # one stride spanning the whole run keeps only the initial and final samples
    n_steps = int(math.floor(cfg.t_end / dt + 1e-9))
    return replace(cfg, dt=dt, record_stride=max(1, n_steps))
