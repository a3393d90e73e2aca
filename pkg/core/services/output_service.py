"""
Output Service for QuatTrack

Writes simulation traces, metrics documents and plot-ready data files.
Floats are written with a fixed printf format, so files are locale
independent and byte-identical across repeated runs.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.config import settings
from core.models.schemas import ComparisonDocument, MetricsDocument
from core.simulation.scenarios import ScenarioConfig
from core.simulation.sim_engine import RunMetrics, SimulationTrace

logger = logging.getLogger(__name__)

# quaternions are serialized scalar-first: qw, qx, qy, qz
TRACE_COLUMNS = [
    "t", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "eq_norm", "ew_norm",
    "dhx", "dhy", "dhz", "taux", "tauy", "tauz", "Vk1", "Vaux",
]


class OutputService:
    """Serializes run results into an output directory."""

    def __init__(self, out_dir: Optional[Path] = None, float_format: Optional[str] = None):
        self.out_dir = Path(out_dir or settings.DEFAULT_OUTPUT_DIR)
        self.float_format = float_format or settings.CSV_FLOAT_FORMAT

    def _ensure_dir(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir

    def _write_frame(self, frame: pd.DataFrame, name: str) -> Path:
        path = self._ensure_dir() / name
        frame.to_csv(path, index=False, float_format=self.float_format, lineterminator="\n")
        return path

    def _write_json(self, payload: Dict, name: str) -> Path:
        path = self._ensure_dir() / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
        return path

    @staticmethod
    def trace_frame(trace: SimulationTrace) -> pd.DataFrame:
        """Trace as a table with the fixed column contract."""
        columns = np.column_stack((
            trace.t,
            trace.q,
            trace.omega,
            trace.eq_norm,
            trace.ew_norm,
            trace.delta_hat,
            trace.tau,
            trace.v_k1,
            trace.v_aux,
        ))
        return pd.DataFrame(columns, columns=TRACE_COLUMNS)

    def write_trace(self, trace: SimulationTrace, fmt: str = "csv") -> Path:
        frame = self.trace_frame(trace)
        if fmt == "csv":
            path = self._write_frame(frame, "trace.csv")
        elif fmt == "json":
            records = [
                {col: float(value) for col, value in zip(TRACE_COLUMNS, row)}
                for row in frame.itertuples(index=False, name=None)
            ]
            path = self._write_json({"columns": TRACE_COLUMNS, "records": records}, "trace.json")
        else:
            raise ValueError(f"Unknown trace format: {fmt}")
        logger.info("Wrote %d trace records to %s", len(frame), path)
        return path

    def write_metrics(self, cfg: ScenarioConfig, metrics: RunMetrics) -> Path:
        document = MetricsDocument.from_metrics(cfg, metrics)
        return self._write_json(document.model_dump(mode="json", by_alias=True), "metrics.json")

    def write_plot_data(self, trace: SimulationTrace) -> List[Path]:
        """
        One file per figure panel: attitude error, velocity error and
        disturbance error Delta(t) - Delta_bar(t).
        """
        e_delta = trace.delta_error
        panels = {
            "attitude_error.csv": pd.DataFrame(
                np.column_stack((trace.t, trace.e_q, trace.eq_norm)),
                columns=["t", "eq_w", "eq_x", "eq_y", "eq_z", "eq_norm"],
            ),
            "velocity_error.csv": pd.DataFrame(
                np.column_stack((trace.t, trace.e_omega, trace.ew_norm)),
                columns=["t", "ew_x", "ew_y", "ew_z", "ew_norm"],
            ),
            "disturbance_error.csv": pd.DataFrame(
                np.column_stack((trace.t, e_delta, np.linalg.norm(e_delta, axis=1))),
                columns=["t", "edx", "edy", "edz", "ed_norm"],
            ),
        }
        return [self._write_frame(frame, name) for name, frame in panels.items()]

    def write_comparison(self, robust: RunMetrics, non_robust: RunMetrics) -> ComparisonDocument:
        """Record the velocity-error RMS ratio between the robust and non-robust laws."""
        if robust.rms_eomega is None or non_robust.rms_eomega is None:
            raise ValueError("both runs must cover the RMS window to be compared")
        document = ComparisonDocument(
            window=list(robust.rms_window),
            rms_ew_robust=robust.rms_eomega,
            rms_ew_non_robust=non_robust.rms_eomega,
            robust_vs_non_robust_ratio=robust.rms_eomega / non_robust.rms_eomega,
        )
        self._write_json(document.model_dump(mode="json"), "comparison.json")
        return document

    def write_sweep_summary(self, rows: List[Dict], columns: Sequence[str]) -> Path:
        return self._write_frame(pd.DataFrame(rows, columns=list(columns)), "sweep_summary.csv")
