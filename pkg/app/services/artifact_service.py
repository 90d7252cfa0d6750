"""
Artifact files written by the CLI jobs.

report.json holds the SuiteReport; report.csv flat rows for plotting;
data.jsonl a header line followed by one configuration per line;
trajectory.jsonl one snapshot per recorded time.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path

from app.domain.configuration import Ensemble, MarkedConfiguration
from app.schemas.report import MCReport, SuiteReport
from app.schemas.run_config import RunConfig, render_config
from app.services.dynamics_service import TrajectoryState

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "name",
    "anchor",
    "kind",
    "estimate",
    "stderr",
    "target",
    "z",
    "pass",
    "n_samples",
    "seed",
)


def config_digest(config: RunConfig) -> str:
    """sha256 of the canonical rendering of a run config."""
    return hashlib.sha256(render_config(config).encode("utf-8")).hexdigest()


class ArtifactService:
    """Write job outputs under one directory."""

    def __init__(self, config: RunConfig, out_dir: str | Path | None = None):
        self.config = config
        self.output = config.output
        self.root = Path(out_dir if out_dir is not None else self.output.dir)

    def _path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        return self.root / name

    def write_report(self, report: SuiteReport) -> Path:
        path = self._path(self.output.report)
        path.write_text(report.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Wrote {len(report.reports)} report rows to {path}")
        return path

    def write_csv(self, reports: list[MCReport]) -> Path:
        path = self._path(Path(self.output.report).with_suffix(".csv").name)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in reports:
                data = row.model_dump(by_alias=True)
                writer.writerow([_cell(data[column]) for column in CSV_COLUMNS])
        return path

    def write_samples(self, batch: Ensemble, seed: int, streams: list[int]) -> Path:
        """Header {seed, streams, params} then one configuration per line."""
        path = self._path(self.output.data)
        header = {"seed": seed, "streams": streams, "params": config_digest(self.config)}
        with path.open("w", encoding="utf-8") as handle:
            handle.write(json.dumps(header, separators=(",", ":")) + "\n")
            for configuration in batch.configurations():
                handle.write(configuration.to_json_line() + "\n")
        logger.info(f"Wrote {batch.size} configurations to {path}")
        return path

    def write_sample_csv(self, configuration: MarkedConfiguration) -> Path:
        path = self._path(Path(self.output.data).with_suffix(".csv").name)
        path.write_text(configuration.to_csv(), encoding="utf-8")
        return path

    def write_trajectory(self, states: list[TrajectoryState], seed: int) -> Path:
        path = self._path(self.output.trajectory)
        header = {"seed": seed, "params": config_digest(self.config)}
        with path.open("w", encoding="utf-8") as handle:
            handle.write(json.dumps(header, separators=(",", ":")) + "\n")
            for state in states:
                configuration = state.configuration
                if isinstance(configuration, Ensemble):
                    configuration = configuration.configuration(0)
                record = {"t": state.time, "atoms": configuration.atoms()}
                handle.write(json.dumps(record, separators=(",", ":")) + "\n")
        logger.info(f"Wrote {len(states)} snapshots to {path}")
        return path


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
