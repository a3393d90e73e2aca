"""
Verification Service for QuatTrack

Executable property checks behind `cli.py verify`: quaternion algebra,
embedded dynamics and the Lyapunov certificates of the tracking laws.
Every check reports the measured residual next to its tolerance.
"""

from typing import Callable, Dict, List, Optional, Sequence
from dataclasses import dataclass, field, replace
import logging
import math
import time

import numpy as np

from core.attitude.dynamics import (
    BodyState,
    ConstantDisturbance,
    EmbeddingParams,
    InertiaMatrix,
    embedded_field,
    norm_sq_closed_form,
    norm_sq_drift,
    rigid_field,
)
from core.attitude.quat_core import Quaternion, conj, mul, norm, norm_sq, pure
from core.attitude.reference import ConstantReference, BenchmarkReference
from core.attitude.tracking import (
    EstimatorState,
    RobustGains,
    TrackingError,
    closed_loop_error_omega_dot,
    compute_error,
    control_torque,
    decrease_bound,
    error_field,
    eta,
    eta_dot,
    feasible_gains,
    lyapunov_V,
    lyapunov_V0,
    lyapunov_Vk1,
    robust_control_torque,
    v0_dot_expression,
)
from core.exceptions import ConfigError, InfeasibleGainsError
from core.simulation.scenarios import (
    ControllerMode,
    ScenarioConfig,
    case_study,
    benchmark_gains,
    benchmark_inertia,
    perturbed_scenario,
)
from core.simulation.sim_engine import (
    SimulationTrace,
    closed_loop_derivative,
    convergence_order,
    rk4_increment,
    simulate,
    split_state,
)

logger = logging.getLogger(__name__)

SUITES = ("algebra", "dynamics", "lyapunov")

ATOL = 1e-12
RTOL = 1e-9
ALGEBRA_CASES = 1000
SEED = 20240601

# step of the central differences taken along the closed-loop flow
FLOW_FD_STEP = 1e-4

# free tumbling rate used by the open-loop checks, rad/s
TUMBLE_RATE = (1.0, 0.5, -0.3)


@dataclass
class PropertyResult:
    """Outcome of one property check."""
    suite: str
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


@dataclass
class SuiteReport:
    """All checks of one suite."""
    suite: str
    results: List[PropertyResult] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def add(self, name: str, residual: float, tolerance: float, passed: Optional[bool] = None, detail: str = ""):
        ok = residual <= tolerance if passed is None else passed
        self.results.append(PropertyResult(self.suite, name, bool(ok), float(residual), tolerance, detail))


def random_quaternion(rng: np.random.Generator) -> Quaternion:
    return Quaternion.from_array(rng.standard_normal(4))


def random_unit_quaternion(rng: np.random.Generator) -> Quaternion:
    q = random_quaternion(rng)
    return q * (1.0 / norm(q))


def _max_violation(actual, expected, atol: float = ATOL, rtol: float = RTOL):
    """Largest |actual - expected| and whether every entry is within atol + rtol |expected|."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    diff = np.abs(actual - expected)
    return float(np.max(diff)), bool(np.all(diff <= atol + rtol * np.abs(expected)))


def _trace_states(trace: SimulationTrace) -> np.ndarray:
    return np.column_stack((trace.q, trace.omega, trace.delta_hat))


def flow_rate(
    cfg: ScenarioConfig,
    aug_state: np.ndarray,
    t: float,
    quantity: Callable[[np.ndarray, float], np.ndarray],
    h: float = FLOW_FD_STEP,
) -> np.ndarray:
    """
    Central-difference time derivative of quantity(state, t) along the closed
    loop through (aug_state, t), from one RK4 step forwards and one backwards.
    """
    fun = lambda s, x: closed_loop_derivative(x, s, cfg)  # noqa: E731
    ahead = rk4_increment(fun, t, aug_state, h)
    behind = rk4_increment(fun, t, aug_state, -h)
    return (np.asarray(quantity(ahead, t + h)) - np.asarray(quantity(behind, t - h))) / (2.0 * h)


def _error_at(cfg: ScenarioConfig, aug_state: np.ndarray, t: float) -> TrackingError:
    state, _ = split_state(aug_state)
    return compute_error(state, cfg.reference.sample(t))


class VerificationService:
    """Runs the property suites."""

    def __init__(self, seed: int = SEED, cases: int = ALGEBRA_CASES):
        self.seed = seed
        self.cases = cases

    def run(self, suites: Sequence[str] = SUITES) -> List[SuiteReport]:
        runners: Dict[str, Callable[[], SuiteReport]] = {
            "algebra": self.algebra_suite,
            "dynamics": self.dynamics_suite,
            "lyapunov": self.lyapunov_suite,
        }
        unknown = [name for name in suites if name not in runners]
        if unknown:
            raise ConfigError(f"unknown suite(s): {', '.join(unknown)}", field="suite")
        reports = []
        for name in suites:
            start = time.time()
            report = runners[name]()
            report.elapsed_seconds = time.time() - start
            logger.info(
                "Suite %s: %d/%d passed in %.1f s",
                name, sum(r.passed for r in report.results), len(report.results), report.elapsed_seconds,
            )
            reports.append(report)
        return reports

    def algebra_suite(self) -> SuiteReport:
        report = SuiteReport("algebra")
        rng = np.random.default_rng(self.seed)
        n = self.cases

        assoc, anti, mult, norm_id, sandwich, error_id = [], [], [], [], [], []
        for _ in range(n):
            p, q, r = (random_quaternion(rng) for _ in range(3))
            assoc.append(_max_violation(mul(mul(p, q), r).as_array(), mul(p, mul(q, r)).as_array()))
            anti.append(_max_violation(conj(mul(p, q)).as_array(), mul(conj(q), conj(p)).as_array()))
            mult.append(_max_violation(norm(mul(p, q)), norm(p) * norm(q)))

            left = mul(conj(q), q)
            right = mul(q, conj(q))
            expected = np.array((norm_sq(q), 0.0, 0.0, 0.0))
            a = _max_violation(left.as_array(), expected)
            b = _max_violation(right.as_array(), expected)
            norm_id.append((max(a[0], b[0]), a[1] and b[1]))

            u = random_unit_quaternion(rng)
            w = pure(rng.standard_normal(3))
            image = mul(mul(conj(u), w), u)
            s = _max_violation(image.s, 0.0)
            m = _max_violation(norm(image), norm(w))
            sandwich.append((max(s[0], m[0]), s[1] and m[1]))

            q_unit = random_unit_quaternion(rng)
            q0 = random_unit_quaternion(rng)
            e = mul(conj(q0), q_unit) - Quaternion.identity()
            v = e.v
            error_id.append(_max_violation(1.0 + 2.0 * e.s + e.s ** 2 + float(v @ v), norm_sq(q_unit)))

        for name, outcomes in (
            ("associativity", assoc),
            ("conjugate_anti_homomorphism", anti),
            ("norm_multiplicativity", mult),
            ("norm_sq_identity", norm_id),
            ("pure_sandwich", sandwich),
            ("error_norm_identity", error_id),
        ):
            report.add(
                name,
                max(o[0] for o in outcomes),
                ATOL,
                passed=all(o[1] for o in outcomes),
                detail=f"{n} random cases, atol={ATOL:g} rtol={RTOL:g}",
            )

        i, j, k = pure((1, 0, 0)), pure((0, 1, 0)), pure((0, 0, 1))
        residual = max(
            np.max(np.abs(mul(i, j).as_array() - k.as_array())),
            np.max(np.abs(mul(j, i).as_array() + k.as_array())),
        )
        report.add("non_commutativity", residual, 0.0, detail="ij = k = -ji")
        return report

    def dynamics_suite(self) -> SuiteReport:
        report = SuiteReport("dynamics")
        rng = np.random.default_rng(self.seed + 1)
        inertia = benchmark_inertia()
        params = EmbeddingParams(alpha=1.0)

        outcomes = []
        for _ in range(self.cases):
            state = BodyState(random_unit_quaternion(rng), rng.standard_normal(3))
            tau = rng.standard_normal(3)
            rigid = rigid_field(state, tau, inertia)
            ext = embedded_field(state, tau, inertia, params)
            a = _max_violation(ext.q_dot.as_array(), rigid.q_dot.as_array())
            b = _max_violation(ext.omega_dot, rigid.omega_dot)
            outcomes.append((max(a[0], b[0]), a[1] and b[1]))
        report.add(
            "embedding_matches_rigid_on_s3",
            max(o[0] for o in outcomes),
            ATOL,
            passed=all(o[1] for o in outcomes),
            detail=f"{self.cases} random unit states",
        )

        report.add("norm_drift_identity", self._norm_drift_residual(inertia, params), 1e-6)

        drift = simulate(self._open_loop(Quaternion.identity(), t_end=30.0, name="s3_invariance"))[1].max_s3_drift
        report.add("s3_invariance", drift, 1e-9, detail="tau = 0, 30 s at dt = 1e-3")

        for v0 in (0.25, 4.0):
            q0 = Quaternion.identity() * math.sqrt(v0)
            trace, _ = simulate(self._open_loop(q0, t_end=10.0, name=f"attraction_{v0:g}"))
            gap = np.abs(np.sum(trace.q ** 2, axis=1) - 1.0)
            active = gap[:-1] > 1e-13
            monotone = bool(np.all(np.diff(gap)[active] <= 0.0))
            report.add(
                f"attraction_from_{v0:g}",
                float(gap[-1]),
                1e-6,
                passed=monotone and gap[-1] < 1e-6,
                detail="| |q|^2 - 1 | at t = 10 s" + ("" if monotone else ", not monotone"),
            )

        report.add("norm_sq_closed_form", self._logistic_residual(), 1e-8)

        order = convergence_order(
            self._open_loop(Quaternion.identity() * math.sqrt(2.0), t_end=1.0, name="order"),
            (0.02, 0.01, 0.005),
        )
        report.add("rk4_convergence_order", order, 3.8, passed=order >= 3.8, detail="observed order, at least 3.8")
        return report

    def lyapunov_suite(self) -> SuiteReport:
        report = SuiteReport("lyapunov")
        self._check_v0_rate(report)
        self._check_error_dynamics(report)
        self._check_decrease(report, robust=False)
        self._check_decrease(report, robust=True)
        self._check_cancellation(report)
        self._check_feasible_gains(report)
        return report

    def _open_loop(self, q0: Quaternion, t_end: float, name: str) -> ScenarioConfig:
        return ScenarioConfig(
            inertia=benchmark_inertia(),
            gains=benchmark_gains(),
            controller_mode=ControllerMode.OPEN_LOOP,
            reference=ConstantReference(),
            initial_q=q0,
            initial_omega=np.array(TUMBLE_RATE),
            t_end=t_end,
            name=name,
        )

    def _norm_drift_residual(self, inertia: InertiaMatrix, params: EmbeddingParams) -> float:
        def fun(t, y):
            tau = math.sin(t) * np.array((0.3, -0.2, 0.1))
            d = embedded_field(BodyState(Quaternion(y[0], y[1:4]), y[4:7]), tau, inertia, params)
            return np.concatenate(((d.q_dot.s,), d.q_dot.v, d.omega_dot))

        y = np.concatenate((np.array((1.2, 0.0, 0.1, math.sqrt(0.06))), TUMBLE_RATE))
        h = 1e-5
        worst = 0.0
        t = 0.0
        for _ in range(10):
            ahead = rk4_increment(fun, t, y, h)
            behind = rk4_increment(fun, t, y, -h)
            fd = (float(ahead[:4] @ ahead[:4]) - float(behind[:4] @ behind[:4])) / (2.0 * h)
            worst = max(worst, abs(fd - norm_sq_drift(Quaternion(y[0], y[1:4]), params.alpha)))
            for _ in range(100):
                y = rk4_increment(fun, t, y, 1e-3)
                t += 1e-3
        return worst

    def _logistic_residual(self, dt: float = 1e-3, t_end: float = 10.0, alpha: float = 1.0) -> float:
        fun = lambda t, v: -2.0 * alpha * (v - 1.0) * v  # noqa: E731
        worst = 0.0
        for v0 in (0.25, 4.0):
            v = np.array([v0])
            for k in range(int(round(t_end / dt))):
                v = rk4_increment(fun, k * dt, v, dt)
                worst = max(worst, abs(float(v[0]) - norm_sq_closed_form((k + 1) * dt, v0, alpha)))
        return worst

    def _check_v0_rate(self, report: SuiteReport):
        cfg = perturbed_scenario(t_end=5.0, record_stride=100)
        g = cfg.controller_gains
        trace, _ = simulate(cfg)
        worst = 0.0
        for y, t in zip(_trace_states(trace), trace.t):
            fd = flow_rate(cfg, y, t, lambda x, s: lyapunov_V0(_error_at(cfg, x, s)))
            e = _error_at(cfg, y, t)
            worst = max(worst, abs(float(fd) - v0_dot_expression(e, norm_sq(split_state(y)[0].q), g)))
        report.add("v0_rate_closed_form", worst, 1e-6, detail="non-robust loop, |e_q(0)| = 0.5")

    def _check_error_dynamics(self, report: SuiteReport):
        cfg = case_study(1, t_end=5.0, record_stride=100)
        g = cfg.controller_gains
        trace, _ = simulate(cfg)
        worst_eq = worst_eta = 0.0

        def eta_of(x, s):
            return eta(_error_at(cfg, x, s), norm_sq(split_state(x)[0].q), g)

        for y, t in zip(_trace_states(trace), trace.t):
            e = _error_at(cfg, y, t)
            q_norm_sq = norm_sq(split_state(y)[0].q)
            omega0 = cfg.reference.sample(t).omega0
            fd_eq = flow_rate(cfg, y, t, lambda x, s: _error_at(cfg, x, s).e_q.as_array())
            worst_eq = max(worst_eq, float(np.max(np.abs(fd_eq - error_field(e, omega0, q_norm_sq, g).as_array()))))
            fd_eta = flow_rate(cfg, y, t, eta_of)
            worst_eta = max(worst_eta, float(np.max(np.abs(fd_eta - eta_dot(e, omega0, q_norm_sq, g)))))
        report.add("attitude_error_dynamics", worst_eq, 1e-5, detail="case study 1, t in [0, 5] s")
        report.add("eta_rate", worst_eta, 1e-5, detail="case study 1, t in [0, 5] s")

    def _check_decrease(self, report: SuiteReport, robust: bool):
        if robust:
            cfg = perturbed_scenario(
                mode=ControllerMode.ROBUST, disturbance=ConstantDisturbance((1.0, 1.0, 1.0)), t_end=10.0
            )
            label = "robust"
        else:
            cfg = perturbed_scenario(t_end=20.0)
            label = "non_robust"
        g = cfg.controller_gains
        rg = cfg.robust_gains
        trace, metrics = simulate(cfg)

        def monitored(x, s):
            state, delta_hat = split_state(x)
            e = _error_at(cfg, x, s)
            if robust:
                return lyapunov_V(e, norm_sq(state.q), rg, cfg.disturbance.evaluate(s) - delta_hat)
            return lyapunov_Vk1(e, norm_sq(state.q), g)

        worst = -math.inf
        for y, t, inside in zip(_trace_states(trace), trace.t, trace.in_region):
            if not inside:
                continue
            e = _error_at(cfg, y, t)
            bound = decrease_bound(e, norm_sq(split_state(y)[0].q), g, cfg.region)
            worst = max(worst, float(flow_rate(cfg, y, t, monitored)) - bound)
        report.add(
            f"decrease_bound_{label}",
            worst,
            1e-6,
            detail="max(dV/dt - bound) over logged samples inside the region",
        )
        report.add(f"region_invariance_{label}", metrics.region_violations, 0)

        if not robust:
            v = trace.v_k1
            active = v[:-1] > 1e-16
            strict = bool(np.all(np.diff(v)[active] < 0.0))
            report.add(
                "vk1_strict_decrease",
                float(np.max(np.diff(v)[active], initial=-math.inf)),
                0.0,
                passed=strict,
            )
            report.add("vk1_convergence", float(v[-1]), 1e-8, detail="V_k1 at t = 20 s")

    def _check_cancellation(self, report: SuiteReport):
        rng = np.random.default_rng(self.seed + 2)
        inertia = benchmark_inertia()
        rg = RobustGains(base=benchmark_gains(), k_delta=1000.0, delta_bound=math.sqrt(3.0))
        reference = BenchmarkReference()
        outcomes = []
        for _ in range(200):
            ref = reference.sample(float(rng.uniform(0.0, 40.0)))
            state = BodyState(random_unit_quaternion(rng) * float(rng.uniform(0.8, 1.2)), rng.standard_normal(3))
            delta = rng.standard_normal(3)
            robust_tau = robust_control_torque(state, ref, rg, EstimatorState(delta.copy()), inertia)
            nominal_tau = control_torque(state, ref, rg.base, inertia)
            outcomes.append(_max_violation(
                closed_loop_error_omega_dot(state, ref, robust_tau, inertia, delta),
                closed_loop_error_omega_dot(state, ref, nominal_tau, inertia, np.zeros(3)),
            ))
        report.add(
            "estimate_cancels_disturbance",
            max(o[0] for o in outcomes),
            ATOL,
            passed=all(o[1] for o in outcomes),
            detail="robust law with Delta_bar = Delta",
        )

    def _check_feasible_gains(self, report: SuiteReport):
        rng = np.random.default_rng(self.seed + 3)
        reference = BenchmarkReference()
        g0 = benchmark_gains()
        delta = 1.0
        worst = -math.inf
        for _ in range(100):
            ref = reference.sample(float(rng.uniform(0.0, 40.0)))
            state = BodyState(random_unit_quaternion(rng), rng.standard_normal(3))
            e = compute_error(state, ref)
            if not norm_sq(e.e_q) < 4.0:
                continue
            selection = feasible_gains(e, delta, g0)
            g = replace(g0, k1=selection.k1)
            level = lyapunov_Vk1(e, norm_sq(state.q), g) + delta ** 2 / (2.0 * selection.k_delta)
            worst = max(worst, level - selection.c, delta ** 2 / (2.0 * selection.c) - selection.k_delta)
        report.add(
            "feasible_gains_certify",
            worst,
            0.0,
            passed=worst < 0.0,
            detail="100 random unit-attitude errors, delta = 1",
        )

        start = reference.sample(0.0)
        antipodal = compute_error(BodyState(-start.q0, start.omega0), start)
        try:
            feasible_gains(antipodal, delta, g0)
            rejected = False
        except InfeasibleGainsError:
            rejected = True
        report.add("feasible_gains_rejects_antipodal", 0.0 if rejected else 1.0, 0.0, passed=rejected)
