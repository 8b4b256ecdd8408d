"""
job_engine.py

This module defines the JobEngine class, the central point of execution for
independent units of numerical work (one solve per probe row, one level per
claim sweep). It supports sequential or process-pool execution, dry-run mode
and per-job logging of outcomes.

Jobs never share state, so a sweep's results do not depend on the number of
workers; outcomes are always returned in submission order.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

from hyperqma.core.logger import Logger


@dataclass
class JobOutcome:
    """
    Result of running one job.

    Attributes:
        name (str): Job name.
        value (Any): Return value, None on failure or dry run.
        error (BaseException, optional): Exception raised by the job.
        runtime (float): Wall-clock seconds.
        skipped (bool): True when the engine ran in dry-run mode.
    """

    name: str
    value: Any = None
    error: BaseException | None = None
    runtime: float = 0.0
    skipped: bool = False

    @property
    def ok(self) -> bool:
        return self.error is None and not self.skipped


def _timed_call(func: Callable, kwargs: dict) -> tuple[Any, BaseException | None, float]:
    start = time.perf_counter()
    try:
        value, error = func(**kwargs), None
    except Exception as e:
        value, error = None, e
    return value, error, time.perf_counter() - start


class JobEngine:
    """
    Central job execution engine.

    Attributes:
        title (str): A label for the engine, used in logs.
        workers (int): Number of worker processes; 1 runs jobs in-process.
        dry_run (bool): If True, jobs are logged and skipped.
        log_level (int): Logging level.
        logger (logging.Logger): The logger instance used for output.
    """

    def __init__(
        self,
        workers: int = 1,
        dry_run: bool = False,
        title: str | None = None,
        log_level: int | None = None,
    ):
        """
        Initializes the JobEngine.

        Args:
            workers (int, optional): Worker processes for run_all. Defaults to 1.
            dry_run (bool, optional): If True, jobs will not be executed. Defaults to False.
            title (str, optional): Optional name for the engine instance. Defaults to 'GenericJobEngine'.
            log_level (int, optional): Logging level. Defaults to the package level.
        """
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}")
        self.title = title or "GenericJobEngine"
        self.workers = int(workers)
        self.dry_run = dry_run
        self.log_level = log_level

        self.logger = Logger(name=self.__class__.__name__, level=log_level).get()

    def _report(self, name: str, value: Any, error: BaseException | None, runtime: float) -> JobOutcome:
        if error is not None:
            self.logger.error(f"🔴 Job '{name}' failed after {runtime:.2f}s: {error}")
        else:
            self.logger.debug(f"🟢 Job '{name}' finished in {runtime:.2f}s ...OK")
        return JobOutcome(name=name, value=value, error=error, runtime=runtime)

    def run(self, job) -> JobOutcome:
        """
        Executes a single job in the current process.

        Args:
            job (Job): The job to run.

        Returns:
            JobOutcome: Value or captured exception, with runtime.
        """
        self.logger.debug(f"[{self.title}] Running job: {job.description}")
        if self.dry_run:
            self.logger.warning(f"[SKIP]: Dry run: skipped '{job.name}'.")
            return JobOutcome(name=job.name, skipped=True)
        return self._report(job.name, *_timed_call(job.func, job.kwargs))

    def run_all(self, jobs: list) -> list[JobOutcome]:
        """
        Executes independent jobs, in a process pool when workers > 1.

        Returns:
            list[JobOutcome]: Outcomes in the order the jobs were given.
        """
        jobs = list(jobs)
        self.logger.info(f"[{self.title}] {len(jobs)} job(s) on {self.workers} worker(s)")
        if self.dry_run or self.workers == 1 or len(jobs) <= 1:
            return [self.run(job) for job in jobs]

        with ProcessPoolExecutor(max_workers=min(self.workers, len(jobs))) as pool:
            futures = [pool.submit(_timed_call, job.func, job.kwargs) for job in jobs]
            return [self._report(job.name, *future.result()) for job, future in zip(jobs, futures)]

