"""
Sweep Processing Service for QuatTrack

Runs one scenario per value of a tunable (k1, k_omega, k_q, k_delta, alpha)
across a thread pool, tracks progress and collects one metrics row per run.
"""

from typing import Dict, Any, List, Optional, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime
from pathlib import Path
import logging

import psutil

from core.config import settings
from core.exceptions import ConfigError, QuatTrackError
from core.services.output_service import OutputService
from core.simulation.scenarios import SWEEPABLE_PARAMS, ScenarioConfig
from core.simulation.sim_engine import simulate

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "param", "value", "final_eq_norm", "final_ew_norm", "final_delta_err_norm",
    "rms_ew_20_40", "settle_time_eq_1e-2", "vk1_monotonicity_violations", "max_s3_drift",
]


class SweepJob:
    """Represents one parameter sweep."""

    def __init__(self, param: str, values: Sequence[float]):
        self.param = param
        self.values = list(values)
        self.status = "pending"
        self.started_at = None
        self.completed_at = None
        self.total_items = len(self.values)
        self.processed_items = 0
        self.success_count = 0
        self.error_count = 0
        self.rows: List[Optional[Dict[str, Any]]] = [None] * self.total_items
        self.errors: List[Dict[str, Any]] = []
        self.progress_percentage = 0.0

    def update_progress(self, processed: int, success: int, error: int):
        """Update job progress."""
        self.processed_items = processed
        self.success_count = success
        self.error_count = error
        self.progress_percentage = (processed / self.total_items) * 100 if self.total_items > 0 else 0


def default_workers() -> int:
    """QUATTRACK_THREADS when set, otherwise the number of logical CPUs."""
    if settings.QUATTRACK_THREADS:
        return max(1, settings.QUATTRACK_THREADS)
    return psutil.cpu_count(logical=True) or 1


def _format_value(value: float) -> str:
    return f"{value:g}"


class BatchService:
    def __init__(self, out_dir: Path, max_workers: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.max_workers = max_workers or default_workers()

    def create_sweep_job(self, param: str, values: Sequence[float]) -> SweepJob:
        """
        Validate a sweep request.

        Args:
            param: Name of the tunable to vary
            values: Values to run, in output order

        Returns:
            SweepJob: Created sweep job
        """
        if param not in SWEEPABLE_PARAMS:
            raise ConfigError(
                f"unknown parameter '{param}', expected one of {', '.join(SWEEPABLE_PARAMS)}",
                field="param",
            )
        if not values:
            raise ConfigError("sweep needs at least one value", field="values")
        seen: Dict[str, float] = {}
        for value in values:
            key = _format_value(value)
            if key in seen:
                raise ConfigError(
                    f"values {seen[key]!r} and {value!r} both map to run directory {param}_{key}",
                    field="values",
                )
            seen[key] = value
        return SweepJob(param, values)

    def run_sweep(self, base: ScenarioConfig, job: SweepJob) -> SweepJob:
        """
        Run every value of the job; each run owns its configuration copy and
        output directory. Configuration errors abort the sweep before any run.
        """
        configs = [base.with_param(job.param, value) for value in job.values]

        job.status = "processing"
        job.started_at = datetime.utcnow()
        processed = success = error = 0

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {
                executor.submit(self._run_single, cfg, job.param, value): index
                for index, (cfg, value) in enumerate(zip(configs, job.values))
            }
            for future in as_completed(futures):
                index = futures[future]
                try:
                    job.rows[index] = future.result()
                    success += 1
                except QuatTrackError as e:
                    error += 1
                    job.errors.append({
                        "index": index,
                        "value": job.values[index],
                        "error": str(e),
                        "timestamp": datetime.utcnow().isoformat(),
                    })
                    logger.error("Sweep run %s=%s failed: %s", job.param, job.values[index], e)
                processed += 1
                job.update_progress(processed, success, error)
                logger.debug("Sweep %s: %.0f%% done", job.param, job.progress_percentage)

        job.status = "completed" if error == 0 else "failed"
        job.completed_at = datetime.utcnow()

        rows = [row for row in job.rows if row is not None]
        OutputService(self.out_dir).write_sweep_summary(rows, SUMMARY_COLUMNS)
        logger.info(
            "Sweep %s finished: %d ok, %d failed in %.2f s",
            job.param, success, error, (job.completed_at - job.started_at).total_seconds(),
        )
        return job

    def _run_single(self, cfg: ScenarioConfig, param: str, value: float) -> Dict[str, Any]:
        """Process a single sweep point."""
        trace, metrics = simulate(cfg)
        run_dir = self.out_dir / f"{param}_{_format_value(value)}"
        OutputService(run_dir).write_metrics(cfg, metrics)
        logger.info("Sweep run %s=%s done", param, _format_value(value))
        return {
            "param": param,
            "value": value,
            "final_eq_norm": metrics.final_eq_norm,
            "final_ew_norm": metrics.final_eomega_norm,
            "final_delta_err_norm": metrics.final_delta_err_norm,
            "rms_ew_20_40": metrics.rms_eomega,
            "settle_time_eq_1e-2": metrics.settle_time_eq,
            "vk1_monotonicity_violations": metrics.vk1_monotonicity_violations,
            "max_s3_drift": metrics.max_s3_drift,
        }
