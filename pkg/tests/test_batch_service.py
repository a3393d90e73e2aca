"""
Tests for parameter sweeps.
"""

import pandas as pd
import pytest

from core.config import settings
from core.exceptions import ConfigError, NumericalAbortError
from core.models.schemas import parse_scenario
from core.services import batch_service
from core.services.batch_service import SUMMARY_COLUMNS, BatchService, default_workers
from core.simulation.scenarios import case_study
from core.simulation.sim_engine import simulate


@pytest.fixture
def base_config(scenario_dict):
    return parse_scenario(scenario_dict)


class TestSweepJob:
    """Test cases for sweep job creation."""

    @pytest.mark.unit
    def test_create_job(self, tmp_path):
        """Test a valid request."""
        job = BatchService(tmp_path, max_workers=1).create_sweep_job("k1", [1.0, 2.0])
        assert job.status == "pending"
        assert job.total_items == 2
        assert job.rows == [None, None]

    @pytest.mark.unit
    def test_unknown_param(self, tmp_path):
        """Test that only the tunables can be swept."""
        with pytest.raises(ConfigError) as exc_info:
            BatchService(tmp_path, max_workers=1).create_sweep_job("dt", [0.1])
        assert exc_info.value.field == "param"

    @pytest.mark.unit
    def test_empty_values(self, tmp_path):
        """Test that a sweep needs at least one value."""
        with pytest.raises(ConfigError) as exc_info:
            BatchService(tmp_path, max_workers=1).create_sweep_job("k1", [])
        assert exc_info.value.field == "values"


    @pytest.mark.unit
    @pytest.mark.parametrize("values", [[1, 1.0], [2.0, 3.0, 2.0], [1.0, 1.0000001]])
    def test_duplicate_values(self, tmp_path, values):
        """Test that values sharing a run directory are rejected."""
        with pytest.raises(ConfigError) as exc_info:
            BatchService(tmp_path, max_workers=1).create_sweep_job("k1", values)
        assert exc_info.value.field == "values"
        assert not list(tmp_path.iterdir())

    @pytest.mark.unit
    def test_progress(self, tmp_path):
        """Test the progress percentage."""
        job = BatchService(tmp_path, max_workers=1).create_sweep_job("k1", [1.0, 2.0, 3.0, 4.0])
        job.update_progress(1, 1, 0)
        assert job.progress_percentage == 25.0


class TestRunSweep:
    """Test cases for running a sweep across the worker pool."""

    @pytest.mark.integration
    def test_summary_in_value_order(self, base_config, tmp_path):
        """Test one summary row per value, in request order, with per-run metrics."""
        service = BatchService(tmp_path, max_workers=2)
        values = [4.0, 1.0, 2.0]
        job = service.run_sweep(base_config, service.create_sweep_job("k_omega", values))

        assert job.status == "completed"
        assert job.success_count == 3
        summary = pd.read_csv(tmp_path / "sweep_summary.csv")
        assert list(summary.columns) == SUMMARY_COLUMNS
        assert summary["value"].tolist() == values
        for value in ("4", "1", "2"):
            assert (tmp_path / f"k_omega_{value}" / "metrics.json").exists()

    @pytest.mark.integration
    def test_matches_single_runs(self, base_config, tmp_path):
        """Test that pooled runs reproduce sequential results exactly."""
        service = BatchService(tmp_path, max_workers=3)
        job = service.run_sweep(base_config, service.create_sweep_job("k_delta", [10.0, 100.0, 1000.0]))
        for row, value in zip(job.rows, [10.0, 100.0, 1000.0]):
            _, metrics = simulate(base_config.with_param("k_delta", value))
            assert row["final_eq_norm"] == metrics.final_eq_norm
            assert row["final_delta_err_norm"] == metrics.final_delta_err_norm

    @pytest.mark.integration
    def test_failed_run_is_recorded(self, base_config, tmp_path, mocker):
        """Test that one aborted run leaves the others in the summary."""
        real_simulate = simulate

        def flaky(cfg):
            if cfg.controller_gains.k1 == 5.0:
                raise NumericalAbortError(0.1, 100, "qw")
            return real_simulate(cfg)

        mocker.patch.object(batch_service, "simulate", side_effect=flaky)
        service = BatchService(tmp_path, max_workers=2)
        job = service.run_sweep(base_config, service.create_sweep_job("k1", [3.0, 5.0]))

        assert job.status == "failed"
        assert job.error_count == 1
        assert job.errors[0]["value"] == 5.0
        summary = pd.read_csv(tmp_path / "sweep_summary.csv")
        assert summary["value"].tolist() == [3.0]

    @pytest.mark.unit
    def test_invalid_value_aborts_before_running(self, base_config, tmp_path, mocker):
        """Test that a non-positive gain is rejected before any run starts."""
        spy = mocker.patch.object(batch_service, "simulate")
        service = BatchService(tmp_path, max_workers=1)
        with pytest.raises(ConfigError):
            service.run_sweep(base_config, service.create_sweep_job("k1", [3.0, -1.0]))
        spy.assert_not_called()


class TestDefaultWorkers:
    """Test cases for the worker count."""

    @pytest.mark.unit
    def test_from_settings(self, mocker):
        """Test that QUATTRACK_THREADS wins."""
        mocker.patch.object(settings, "QUATTRACK_THREADS", 3)
        assert default_workers() == 3

    @pytest.mark.unit
    def test_from_cpu_count(self, mocker):
        """Test the CPU-count fallback."""
        mocker.patch.object(settings, "QUATTRACK_THREADS", None)
        mocker.patch.object(batch_service.psutil, "cpu_count", return_value=6)
        assert default_workers() == 6


class TestCaseStudySweeps:
    """Full-horizon sweeps over the case study 1 scenario."""

    @pytest.mark.slow
    def test_estimator_gain_sweep(self, tmp_path):
        """Test that a larger k_delta never leaves a larger final disturbance error."""
        service = BatchService(tmp_path, max_workers=3)
        values = [10.0, 100.0, 1000.0]
        job = service.run_sweep(case_study(1), service.create_sweep_job("k_delta", values))

        assert job.status == "completed"
        errors = [row["final_delta_err_norm"] for row in job.rows]
        assert all(later <= earlier for earlier, later in zip(errors, errors[1:]))
        assert errors[-1] < 1e-2
        summary = pd.read_csv(tmp_path / "sweep_summary.csv")
        assert summary["value"].tolist() == values

    @pytest.mark.slow
    def test_embedding_gain_sweep(self, tmp_path):
        """Test that the attitude stays on the unit sphere for every alpha."""
        service = BatchService(tmp_path, max_workers=3)
        job = service.run_sweep(case_study(1), service.create_sweep_job("alpha", [0.5, 1.0, 2.0]))

        assert job.status == "completed"
        for row in job.rows:
            assert row["max_s3_drift"] <= 1e-9
