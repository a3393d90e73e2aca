"""
Scenario Configuration

ScenarioConfig bundles everything a closed-loop run needs. case_study builds
the three benchmark scenarios: a constant disturbance rejected by the robust
law, a sinusoidal disturbance under the robust law, and the same sinusoidal
disturbance under the non-robust law.
"""

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from enum import Enum
from typing import Optional, Union

import numpy as np

from core.attitude.dynamics import (
    ConstantDisturbance,
    DisturbanceModel,
    EmbeddingParams,
    InertiaMatrix,
    NoDisturbance,
    SinusoidalDisturbance,
)
from core.attitude.quat_core import Quaternion, Vec3, norm_sq
from core.attitude.reference import BenchmarkReference, ReferenceTrajectory
from core.attitude.tracking import ControllerGains, RegionSpec, RobustGains
from core.config import settings
from core.exceptions import ConfigError

# principal moments of the benchmark spacecraft, kg m^2
BENCHMARK_INERTIA_DIAGONAL = (4.250, 4.337, 3.664)
BENCHMARK_DISTURBANCE = (1.0, 1.0, 1.0)
BENCHMARK_DISTURBANCE_FREQUENCY = 0.5
BENCHMARK_K_DELTA = 1000.0

SWEEPABLE_PARAMS = ("k1", "k_omega", "k_q", "k_delta", "alpha")


class ControllerMode(str, Enum):
    NON_ROBUST = "non_robust"
    ROBUST = "robust"
    OPEN_LOOP = "open_loop"


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One closed-loop run.

    t_end = 0 yields a single-record trace of the initial condition; any other
    horizon must cover at least one step.
    """

    inertia: InertiaMatrix
    gains: Union[ControllerGains, RobustGains]
    controller_mode: ControllerMode
    disturbance: DisturbanceModel = field(default_factory=NoDisturbance)
    reference: ReferenceTrajectory = field(default_factory=BenchmarkReference)
    initial_q: Quaternion = field(default_factory=Quaternion.identity)
    initial_omega: Vec3 = field(default_factory=lambda: np.zeros(3))
    region: Optional[RegionSpec] = None
    dt: float = settings.DEFAULT_DT
    t_end: float = settings.DEFAULT_T_END
    record_stride: int = settings.DEFAULT_RECORD_STRIDE
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "controller_mode", ControllerMode(self.controller_mode))
        object.__setattr__(
            self, "initial_omega", np.asarray(self.initial_omega, dtype=np.float64)
        )
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}", field="dt")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}", field="t_end")
        if 0 < self.t_end < self.dt:
            raise ConfigError(
                f"t_end={self.t_end} is shorter than one step dt={self.dt}", field="t_end"
            )
        if not (isinstance(self.record_stride, int) and self.record_stride >= 1):
            raise ConfigError(
                f"record_stride must be a positive integer, got {self.record_stride}",
                field="record_stride",
            )
        if self.controller_mode is ControllerMode.ROBUST and not isinstance(self.gains, RobustGains):
            raise ConfigError("robust mode requires k_delta", field="k_delta")
        if self.initial_omega.shape != (3,) or not np.all(np.isfinite(self.initial_omega)):
            raise ConfigError("initial omega must be three finite numbers", field="initial.omega")
        if not self.initial_q.is_finite():
            raise ConfigError("initial attitude must be finite", field="initial.q")

    @property
    def controller_gains(self) -> ControllerGains:
        return self.gains.base if isinstance(self.gains, RobustGains) else self.gains

    @property
    def robust_gains(self) -> Optional[RobustGains]:
        return self.gains if isinstance(self.gains, RobustGains) else None

    @cached_property
    def embedding(self) -> EmbeddingParams:
        return EmbeddingParams(self.controller_gains.alpha)

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    def initial_state_vector(self) -> np.ndarray:
        """Augmented state [qw, qx, qy, qz, wx, wy, wz, dhx, dhy, dhz] with Delta_bar(0) = 0."""
        return np.concatenate((self.initial_q.as_array(), self.initial_omega, np.zeros(3)))

    def starts_outside_embedding_region(self) -> bool:
        """The origin of H is an equilibrium of the norm dynamics and is never attracted."""
        return norm_sq(self.initial_q) == 0.0

    def with_param(self, name: str, value: float) -> "ScenarioConfig":
        """Copy of this scenario with one tunable replaced."""
        if name not in SWEEPABLE_PARAMS:
            raise ConfigError(
                f"unknown parameter '{name}', expected one of {', '.join(SWEEPABLE_PARAMS)}",
                field="param",
            )
        value = float(value)
        if name == "k_delta":
            rg = self.robust_gains
            if rg is None:
                raise ConfigError("k_delta applies to robust scenarios only", field="param")
            return replace(self, gains=replace(rg, k_delta=value))
        base = replace(self.controller_gains, **{name: value})
        rg = self.robust_gains
        gains = replace(rg, base=base) if rg is not None else base
        return replace(self, gains=gains)


def benchmark_inertia() -> InertiaMatrix:
    return InertiaMatrix.diagonal(*BENCHMARK_INERTIA_DIAGONAL)


def benchmark_gains(k_q: float = 3.0) -> ControllerGains:
    # k_q is not given for the benchmark; it follows k1
    return ControllerGains(alpha=settings.DEFAULT_ALPHA, k_q=k_q, k1=3.0, k_omega=3.0)


def case_study(
    n: int,
    *,
    k_delta: float = BENCHMARK_K_DELTA,
    dt: float = settings.DEFAULT_DT,
    t_end: float = settings.DEFAULT_T_END,
    record_stride: int = settings.DEFAULT_RECORD_STRIDE,
) -> ScenarioConfig:
    """
    Benchmark scenarios.

    All three start from the antipodal attitude q(0) = -q0(0) with
    Omega(0) = W0(pi/6) and track the analytic reference.

        1: Delta = (1, 1, 1), robust law
        2: Delta = cos(0.5 t)(1, 1, 1), robust law
        3: Delta = cos(0.5 t)(1, 1, 1), non-robust law
    """
    if n not in (1, 2, 3):
        raise ConfigError(f"case study must be 1, 2 or 3, got {n}", field="n")

    reference = BenchmarkReference()
    initial_q = -reference.sample(0.0).q0
    initial_omega = reference.sample(math.pi / 6.0).omega0
    base = benchmark_gains()

    if n == 1:
        disturbance: DisturbanceModel = ConstantDisturbance(BENCHMARK_DISTURBANCE)
    else:
        disturbance = SinusoidalDisturbance(BENCHMARK_DISTURBANCE, BENCHMARK_DISTURBANCE_FREQUENCY)
    delta_bound = float(np.linalg.norm(BENCHMARK_DISTURBANCE))

    if n == 3:
        gains: Union[ControllerGains, RobustGains] = base
        mode = ControllerMode.NON_ROBUST
    else:
        gains = RobustGains(base=base, k_delta=k_delta, delta_bound=delta_bound)
        mode = ControllerMode.ROBUST

    return ScenarioConfig(
        inertia=benchmark_inertia(),
        gains=gains,
        controller_mode=mode,
        disturbance=disturbance,
        reference=reference,
        initial_q=initial_q,
        initial_omega=initial_omega,
        region=RegionSpec(c=1.0, epsilon=0.1),
        dt=dt,
        t_end=t_end,
        record_stride=record_stride,
        name=f"case_study_{n}",
    )


def perturbed_scenario(
    eq_norm: float = 0.5,
    *,
    mode: ControllerMode = ControllerMode.NON_ROBUST,
    disturbance: Optional[DisturbanceModel] = None,
    k_delta: float = BENCHMARK_K_DELTA,
    region: Optional[RegionSpec] = None,
    dt: float = settings.DEFAULT_DT,
    t_end: float = 20.0,
    record_stride: int = settings.DEFAULT_RECORD_STRIDE,
) -> ScenarioConfig:
    """
    Unit attitude rotated about the body x axis away from the reference so
    that |e_q(0)| = eq_norm, with e_omega(0) = 0.
    """
    if not 0.0 <= eq_norm < 2.0:
        raise ConfigError(f"eq_norm must lie in [0, 2), got {eq_norm}", field="eq_norm")
    reference = BenchmarkReference()
    start = reference.sample(0.0)
    # |r - 1|^2 = 2 - 2 r_s for a unit quaternion r
    r_s = 1.0 - 0.5 * eq_norm ** 2
    offset = Quaternion(r_s, np.array((math.sqrt(max(0.0, 1.0 - r_s * r_s)), 0.0, 0.0)))
    base = benchmark_gains()
    if mode is ControllerMode.ROBUST:
        gains: Union[ControllerGains, RobustGains] = RobustGains(
            base=base, k_delta=k_delta, delta_bound=float(np.linalg.norm(BENCHMARK_DISTURBANCE))
        )
    else:
        gains = base
    return ScenarioConfig(
        inertia=benchmark_inertia(),
        gains=gains,
        controller_mode=mode,
        disturbance=disturbance if disturbance is not None else NoDisturbance(),
        reference=reference,
        initial_q=start.q0 * offset,
        initial_omega=start.omega0,
        region=region if region is not None else RegionSpec(c=1.0, epsilon=0.1),
        dt=dt,
        t_end=t_end,
        record_stride=record_stride,
        name=f"perturbed_{mode.value}",
    )
