"""
Execute one run-config job: sample, verify, simulate or adjudicate.
"""

import logging
from collections.abc import Callable

from app.core.errors import ComputationError, RunConfigError
from app.core.logging_config import LogExecutionTime
from app.schemas.report import MCReport, SuiteReport
from app.schemas.run_config import RunConfig
from app.services.artifact_service import ArtifactService, config_digest
from app.services.fixture_service import FixtureService
from app.services.sampler_service import RandomStream, SamplerService
from app.services.verification_service import VerificationService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

# Stream ids of the sample and simulate jobs.
SAMPLE_STREAM = 0
MOTION_STREAM = 1


def summary_line(report: MCReport) -> str:
    verdict = "PASS" if report.passed else "FAIL"
    return (
        f"{verdict} {report.name} z={report.z:+.3f} "
        f"estimate={report.estimate!r} target={report.target!r}"
    )


class JobService:
    """Run a job and write its artifacts; ``echo`` receives the summary lines."""

    def __init__(
        self,
        config: RunConfig,
        out_dir: str | None = None,
        echo: Callable[[str], None] = print,
    ):
        self.config = config
        self.artifacts = ArtifactService(config, out_dir)
        self.echo = echo
        self.fixture = FixtureService().build(config)

    def run(self) -> int:
        """
        Execute the job named in the config.

        Returns:
            0 when every check passed, 1 when a check failed, 2 on a
            computation error
        """
        command = self.config.job.command
        try:
            with LogExecutionTime(logger, f"job {command}"):
                if command == "sample":
                    return self.sample()
                if command == "simulate":
                    return self.simulate()
                if command == "adjudicate":
                    return self.adjudicate()
                return self.verify()
        except ComputationError as e:
            logger.error(f"{command} job failed: {e.message}", extra={"error": e.to_dict()})
            self.echo(f"ERROR {e.message}")
            return EXIT_ERROR

    def sample(self) -> int:
        job = self.config.job
        sampler = SamplerService(self.fixture.rho, envelope=self.config.space.envelope)
        gen = RandomStream(job.seed, SAMPLE_STREAM).generator()
        window = self.fixture.domain
        if job.measure == "simple":
            batch = sampler.sample_simple_batch(1.0, window, gen, job.n)
        elif job.measure == "marked":
            if self.fixture.marks is None:
                raise RunConfigError([(None, "marked sampling needs a [marks] section")])
            batch = sampler.sample_marked_batch(self.fixture.marks, window, gen, job.n)
        else:
            batch = sampler.sample_compound_batch(self.fixture.tau, window, gen, job.n)
        path = self.artifacts.write_samples(batch, job.seed, [SAMPLE_STREAM])
        if self.config.output.csv and batch.size:
            self.artifacts.write_sample_csv(batch.configuration(0))
        self.echo(f"SAMPLED {batch.size} {job.measure} configurations ({batch.n_atoms} atoms) -> {path}")
        return EXIT_OK

    def simulate(self) -> int:
        job = self.config.job
        omega0 = self.fixture.probe()
        if omega0 is None:
            sampler = SamplerService(self.fixture.rho, envelope=self.config.space.envelope)
            omega0 = sampler.sample_compound(
                self.fixture.tau, self.fixture.domain, RandomStream(job.seed, SAMPLE_STREAM)
            )
        verifier = VerificationService(self.fixture)
        states = verifier.dynamics.simulate(
            omega0, job.dt, job.T, job.mode, RandomStream(job.seed, MOTION_STREAM), job.stride
        )
        path = self.artifacts.write_trajectory(states, job.seed)
        self.echo(f"SIMULATED {len(states)} snapshots up to T={job.T!r} in {job.mode} mode -> {path}")
        return EXIT_OK

    def verify(self) -> int:
        verifier = VerificationService(self.fixture)
        reports = verifier.run_suite(self.config.job.check)
        return self._finish(reports, check=self.config.job.check)

    def adjudicate(self) -> int:
        """Exit 0 when the omega metric convention passes every adjudication row."""
        verifier = VerificationService(self.fixture)
        reports, verdict = verifier.adjudicate()
        self._finish(reports, verdict=verdict)
        for mode, ok in verdict.items():
            self.echo(f"MODE {mode} {'passes' if ok else 'fails'}")
        return EXIT_OK if verdict.get("omega_metric") else EXIT_FAILED

    def _finish(self, reports: list[MCReport], **metadata) -> int:
        job = self.config.job
        suite = SuiteReport.from_reports(
            reports, z_max=job.z_max, params=config_digest(self.config), seed=job.seed, **metadata
        )
        self.artifacts.write_report(suite)
        if self.config.output.csv:
            self.artifacts.write_csv(reports)
        for report in reports:
            self.echo(summary_line(report))
        failed = [r.name for r in reports if not r.passed]
        if failed:
            logger.warning(
                f"{len(failed)} of {len(reports)} checks failed: {failed}; "
                f"{suite.metadata['expected_false_failures']:.2f} Monte Carlo failures "
                f"expected by chance at z_max={job.z_max!r}"
            )
            return EXIT_FAILED
        logger.info(f"All {len(reports)} checks passed")
        return EXIT_OK


def run(config: RunConfig, out_dir: str | None = None, echo: Callable[[str], None] = print) -> int:
    """Execute the config's job and return the process exit status."""
    return JobService(config, out_dir, echo).run()
