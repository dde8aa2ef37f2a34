"""
Run reports: assembling, writing and reading the JSON report, re-verifying
its jobs, and dumping per-point grid errors as CSV.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import json
import logging

import numpy as np
import pandas as pd

from config.settings import settings
from src.core.enumeration import Enumeration
from src.core.series import CoefficientSequence
from .construction_service import (
    ApproximationJob, ConstructionResult, JobRecord, JobStatus, UniversalSeriesConstructor
)


class ReportError(Exception):
    """Unreadable or inconsistent run report"""
    pass


@dataclass
class JobVerification:
    job_index: int
    recorded_error: Optional[float]
    verified_error: Optional[float]
    density: List[int]
    passed: bool
    message: str = ""


class ReportService:
    """Builds, stores and audits run reports."""

    def __init__(self, config: Optional[Dict] = None):
        """
        Initialize the report service.

        Args:
            config: Configuration dictionary
                - verify_multiplier: Verification density over the recorded density
                - verify_tolerance_factor: Allowed growth of the recorded error
                - verify_samples: Fixed per-factor verification count, overrides the multiplier
        """
        self.config = {
            'verify_multiplier': settings.VERIFY_DENSITY_MULTIPLIER,
            'verify_tolerance_factor': settings.VERIFY_TOLERANCE_FACTOR,
            'verify_samples': None
        }
        if config:
            self.config.update({k: v for k, v in config.items() if v is not None})
        self.logger = logging.getLogger(__name__)

    def build_report(
            self,
            config_echo: Dict[str, Any],
            result: ConstructionResult,
            enumeration: Enumeration,
            timings: Dict[str, float]
    ) -> Dict[str, Any]:
        return {
            'project': settings.PROJECT_NAME,
            'version': settings.VERSION,
            'config': config_echo,
            'frontier': result.frontier,
            'jobs': [r.to_dict() for r in sorted(result.records, key=lambda r: r.job_index)],
            'coefficients': result.sequence.to_records(enumeration),
            'timings': timings
        }

    def write_report(self, report: Dict[str, Any], path: Union[str, Path]) -> Path:
        """
        Write the report as JSON with sorted keys; floats keep Python's
        shortest round-trip representation.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', encoding='utf-8') as handle:
            json.dump(report, handle, sort_keys=True, indent=2, allow_nan=False)
            handle.write('\n')
        self.logger.info("Report written to %s", path)
        return path

    def load_report(self, path: Union[str, Path]) -> Dict[str, Any]:
        try:
            with Path(path).open('r', encoding='utf-8') as handle:
                report = json.load(handle)
        except OSError as e:
            raise ReportError(f"Cannot read report {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ReportError(f"Report {path} line {e.lineno}, column {e.colno}: {e.msg}") from e
        if not isinstance(report, dict) or 'jobs' not in report or 'coefficients' not in report:
            raise ReportError(f"Report {path} needs 'jobs' and 'coefficients' entries")
        return report

    @staticmethod
    def sequence_from_report(report: Dict[str, Any], n_params: int) -> CoefficientSequence:
        try:
            return CoefficientSequence.from_records(n_params, report['coefficients'])
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError(f"Malformed coefficient block: {e}") from e

    @staticmethod
    def records_from_report(report: Dict[str, Any]) -> List[JobRecord]:
        records = []
        for entry in report['jobs']:
            entry = dict(entry)
            entry.setdefault('label', '')
            entry.setdefault('status', JobStatus.CERTIFIED.value if entry.get('lambda') is not None
                             else JobStatus.FAILED.value)
            try:
                records.append(JobRecord.from_dict(entry))
            except (KeyError, TypeError, ValueError) as e:
                raise ReportError(f"Malformed job record {entry.get('job_index')}: {e}") from e
        return records

    def verify(
            self,
            report: Dict[str, Any],
            jobs: Sequence[ApproximationJob],
            constructor: UniversalSeriesConstructor
    ) -> List[JobVerification]:
        """
        Re-check every job of a report on denser fresh grids.

        A job passes when it was certified and the new error is at most
        `verify_tolerance_factor` times the recorded one.

        Raises:
            ReportError: If the report does not match the job list
        """
        n_params = jobs[0].F.dimension if jobs else 0
        sequence = self.sequence_from_report(report, n_params)
        records = self.records_from_report(report)
        indices = sorted(r.job_index for r in records)
        if indices != list(range(len(jobs))):
            raise ReportError(
                f"Report lists jobs {indices}, the configuration has {len(jobs)} jobs"
            )

        outcomes = []
        for record in sorted(records, key=lambda r: r.job_index):
            job = jobs[record.job_index]
            if not record.succeeded or record.lam is None or record.certified_error is None:
                outcomes.append(JobVerification(
                    record.job_index, record.certified_error, None, [], False,
                    f"job was not certified ({record.status.value})"
                ))
                continue

            density = self._density_for(record, constructor, job)
            verified = constructor.verify_job(sequence, job, record.lam, density)
            allowed = self.config['verify_tolerance_factor'] * record.certified_error \
                + settings.PADDING_TOLERANCE
            passed = verified <= allowed
            outcomes.append(JobVerification(
                record.job_index, record.certified_error, verified, density, passed,
                "" if passed else f"error {verified:.3e} exceeds allowed {allowed:.3e}"
            ))
            log = self.logger.info if passed else self.logger.warning
            log("Job %d verified at density %s: %.3e (recorded %.3e)",
                record.job_index, density, verified, record.certified_error)
        return outcomes

    def _density_for(
            self,
            record: JobRecord,
            constructor: UniversalSeriesConstructor,
            job: ApproximationJob
    ) -> List[int]:
        if self.config['verify_samples']:
            return [int(self.config['verify_samples'])] * job.joint.dimension
        recorded = record.verification_density
        if not recorded:
            approximator = constructor.approximator
            base = approximator.samples_for([approximator.config['initial_degree']] * job.joint.dimension)
            recorded = [approximator.config['certify_multiplier'] * c for c in base]
        recorded = [int(c) for c in recorded]
        scale = float(self.config['verify_multiplier'])
        cap = constructor.config['max_points']
        if cap and np.prod(recorded, dtype=float) * scale ** len(recorded) > cap:
            # densest uniform refinement that fits the cap, never below the recorded grid
            scale = max(1.0, (cap / np.prod(recorded, dtype=float)) ** (1.0 / len(recorded)))
            self.logger.info("Job %d: verification density scaled by %.3f to fit %d points",
                             record.job_index, scale, cap)
        return [max(c, int(scale * c)) for c in recorded]

    def dump_grid(
            self,
            path: Union[str, Path],
            result: ConstructionResult,
            jobs: Sequence[ApproximationJob],
            constructor: UniversalSeriesConstructor
    ) -> Path:
        """Write |S_lambda - h| at every verification point of every certified job."""
        frames = []
        for record in result.records:
            if not record.succeeded:
                continue
            job = jobs[record.job_index]
            grid, errors = constructor.grid_errors(
                result.sequence, job, record.lam, record.verification_density
            )
            names = [f"w{i + 1}" for i in range(job.F.dimension)] + \
                [f"z{i + 1}" for i in range(job.T.dimension)]
            columns: Dict[str, Any] = {'job': record.job_index, 'label': job.label}
            for i, name in enumerate(names):
                columns[f"{name}_re"] = grid.points[:, i].real
                columns[f"{name}_im"] = grid.points[:, i].imag
            columns['abs_error'] = errors
            frames.append(pd.DataFrame(columns))

        frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=['job', 'label', 'abs_error'])
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        self.logger.info("Grid errors for %d jobs written to %s", len(frames), path)
        return path
