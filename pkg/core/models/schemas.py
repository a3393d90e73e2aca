"""
Pydantic schemas for scenario files and metrics documents
"""

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing import List, Optional, Union
from enum import Enum
import json
from pathlib import Path

from core.attitude.dynamics import (
    ConstantDisturbance,
    DisturbanceModel,
    InertiaMatrix,
    NoDisturbance,
    SinusoidalDisturbance,
)
from core.attitude.quat_core import Quaternion
from core.attitude.reference import ConstantReference, BenchmarkReference, ReferenceTrajectory
from core.attitude.tracking import ControllerGains, RegionSpec, RobustGains
from core.config import settings
from core.exceptions import ConfigError
from core.simulation.scenarios import ControllerMode, ScenarioConfig
from core.simulation.sim_engine import RunMetrics


class DisturbanceType(str, Enum):
    NONE = "none"
    CONSTANT = "constant"
    SINUSOIDAL = "sinusoidal"


class ReferenceType(str, Enum):
    BENCHMARK = "benchmark"
    CONSTANT = "constant"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GainsModel(_Strict):
    alpha: float = Field(settings.DEFAULT_ALPHA, gt=0, description="Embedding gain (1/s)")
    k_q: float = Field(3.0, gt=0)
    k1: float = Field(3.0, gt=0)
    k_omega: float = Field(3.0, gt=0)
    k_delta: Optional[float] = Field(None, gt=0, description="Estimator gain, robust mode only")
    delta_bound: float = Field(0.0, ge=0, description="Known bound on |Delta| (N m)")


class DisturbanceModelSchema(_Strict):
    type: DisturbanceType = DisturbanceType.NONE
    vector: Optional[List[float]] = Field(None, min_length=3, max_length=3)
    frequency: Optional[float] = Field(None, ge=0, description="rad/s, sinusoidal only")

    @model_validator(mode="after")
    def _check_parameters(self):
        if self.type != DisturbanceType.NONE and self.vector is None:
            raise ValueError(f"disturbance type '{self.type.value}' requires 'vector'")
        if self.type == DisturbanceType.SINUSOIDAL and self.frequency is None:
            raise ValueError("sinusoidal disturbance requires 'frequency'")
        return self


class InitialModel(_Strict):
    q: List[float] = Field([1.0, 0.0, 0.0, 0.0], min_length=4, max_length=4, description="[w, x, y, z]")
    omega: List[float] = Field([0.0, 0.0, 0.0], min_length=3, max_length=3, description="rad/s")


class SimModel(_Strict):
    dt: float = Field(settings.DEFAULT_DT, gt=0, description="RK4 step (s)")
    t_end: float = Field(settings.DEFAULT_T_END, ge=0, description="Horizon (s)")
    record_stride: int = Field(settings.DEFAULT_RECORD_STRIDE, ge=1)


class RegionModel(_Strict):
    c: float = Field(..., gt=0, lt=2)
    epsilon: float = Field(..., ge=0, lt=1)


class ReferenceModel(_Strict):
    type: ReferenceType = ReferenceType.BENCHMARK
    q0: Optional[List[float]] = Field(None, min_length=4, max_length=4)


class ScenarioFile(_Strict):
    """Top-level JSON scenario document."""

    name: str = "scenario"
    inertia: Union[List[List[float]], List[float]] = Field(
        ..., description="3x3 row-major matrix or diagonal triple (kg m^2)"
    )
    gains: GainsModel = Field(default_factory=GainsModel)
    mode: ControllerMode = ControllerMode.ROBUST
    disturbance: DisturbanceModelSchema = Field(default_factory=DisturbanceModelSchema)
    reference: ReferenceModel = Field(default_factory=ReferenceModel)
    initial: InitialModel = Field(default_factory=InitialModel)
    sim: SimModel = Field(default_factory=SimModel)
    region: Optional[RegionModel] = None

    @field_validator("inertia")
    @classmethod
    def _check_inertia_shape(cls, value):
        if value and isinstance(value[0], list):
            if len(value) != 3 or any(len(row) != 3 for row in value):
                raise ValueError("inertia matrix must be 3x3")
        elif len(value) != 3:
            raise ValueError("inertia diagonal must have 3 entries")
        return value

    @model_validator(mode="after")
    def _check_mode(self):
        if self.mode == ControllerMode.ROBUST and self.gains.k_delta is None:
            raise ConfigError("robust mode requires gains.k_delta", field="gains.k_delta")
        return self

    def to_config(self) -> ScenarioConfig:
        """Build the domain configuration; domain checks surface as ConfigError."""
        if self.inertia and isinstance(self.inertia[0], list):
            inertia = InertiaMatrix(self.inertia)
        else:
            inertia = InertiaMatrix.diagonal(*self.inertia)

        g = self.gains
        base = _prefixed("gains", lambda: ControllerGains(
            alpha=g.alpha, k_q=g.k_q, k1=g.k1, k_omega=g.k_omega
        ))
        if g.k_delta is not None:
            gains = _prefixed("gains", lambda: RobustGains(
                base=base, k_delta=g.k_delta, delta_bound=g.delta_bound
            ))
        else:
            gains = base

        region = None
        if self.region is not None:
            region = _prefixed("region", lambda: RegionSpec(c=self.region.c, epsilon=self.region.epsilon))

        reference = _prefixed("reference", self._reference)

        return _prefixed("sim", lambda: ScenarioConfig(
            inertia=inertia,
            gains=gains,
            controller_mode=self.mode,
            disturbance=self._disturbance(),
            reference=reference,
            initial_q=Quaternion.from_array(self.initial.q),
            initial_omega=self.initial.omega,
            region=region,
            dt=self.sim.dt,
            t_end=self.sim.t_end,
            record_stride=self.sim.record_stride,
            name=self.name,
        ))

    def _disturbance(self) -> DisturbanceModel:
        d = self.disturbance
        if d.type == DisturbanceType.CONSTANT:
            return ConstantDisturbance(d.vector)
        if d.type == DisturbanceType.SINUSOIDAL:
            return SinusoidalDisturbance(d.vector, d.frequency)
        return NoDisturbance()

    def _reference(self) -> ReferenceTrajectory:
        if self.reference.type == ReferenceType.CONSTANT:
            q0 = Quaternion.from_array(self.reference.q0) if self.reference.q0 else None
            return ConstantReference(q0)
        return BenchmarkReference()


def _prefixed(prefix: str, build):
    """Qualify bare field names of domain errors with their section in the file."""
    try:
        return build()
    except ConfigError as e:
        if e.field and "." not in e.field:
            raise ConfigError(e.detail, field=f"{prefix}.{e.field}") from e
        raise


def _format_location(loc) -> str:
    return ".".join(str(part) for part in loc)


def load_scenario_file(path: Union[str, Path]) -> ScenarioConfig:
    """
    Read and validate a JSON scenario file.

    Raises ConfigError naming the offending field for a missing file,
    malformed JSON or any schema or domain violation.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}", field="config")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", field="config") from e
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> ScenarioConfig:
    try:
        document = ScenarioFile.model_validate(raw)
    except ValidationError as e:
        errors = e.errors()
        first = errors[0]
        if isinstance(first.get("ctx", {}).get("error"), ConfigError):
            raise first["ctx"]["error"] from e
        field = _format_location(first["loc"]) or "config"
        raise ConfigError(first["msg"], field=field) from e
    return document.to_config()


class MetricsDocument(BaseModel):
    """Metrics JSON written next to each trace."""

    model_config = ConfigDict(populate_by_name=True)

    scenario: str
    mode: ControllerMode
    final_eq_norm: float
    final_ew_norm: float
    final_delta_err_norm: float
    rms_ew_20_40: Optional[float]
    settle_time_eq_1e_2: Optional[float] = Field(None, alias="settle_time_eq_1e-2")
    vk1_monotonicity_violations: int
    max_s3_drift: float
    region_entry_time: Optional[float] = None
    region_violations: int = 0
    m_epsilon_violations: int = 0

    @classmethod
    def from_metrics(cls, cfg: ScenarioConfig, metrics: RunMetrics) -> "MetricsDocument":
        return cls(
            scenario=cfg.name,
            mode=cfg.controller_mode,
            final_eq_norm=metrics.final_eq_norm,
            final_ew_norm=metrics.final_eomega_norm,
            final_delta_err_norm=metrics.final_delta_err_norm,
            rms_ew_20_40=metrics.rms_eomega,
            settle_time_eq_1e_2=metrics.settle_time_eq,
            vk1_monotonicity_violations=metrics.vk1_monotonicity_violations,
            max_s3_drift=metrics.max_s3_drift,
            region_entry_time=metrics.region_entry_time,
            region_violations=metrics.region_violations,
            m_epsilon_violations=metrics.m_epsilon_violations,
        )


class ComparisonDocument(BaseModel):
    """Robust versus non-robust velocity-error comparison."""

    window: List[float]
    rms_ew_robust: float
    rms_ew_non_robust: float
    robust_vs_non_robust_ratio: float
