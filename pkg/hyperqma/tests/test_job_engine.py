# hyperqma/tests/test_job_engine.py

import logging

import numpy as np
import pytest

from hyperqma.core import families
from hyperqma.core.job import Job
from hyperqma.core.job_engine import JobEngine


def double(x):
    return 2 * x


def explode(x):
    raise ValueError(f"bad input {x}")


# Fixture for the JobEngine instance
@pytest.fixture
def engine():
    return JobEngine(title="TestEngine")


@pytest.fixture
def engine_dry_run():
    return JobEngine(dry_run=True)


# --- JobEngine ---


def test_engine_init_defaults():
    eng = JobEngine()
    assert eng.workers == 1
    assert eng.dry_run is False
    assert eng.log_level is None
    assert eng.title == "GenericJobEngine"


def test_engine_init_custom():
    eng = JobEngine(workers=3, dry_run=True, title="Sweep", log_level=logging.DEBUG)
    assert eng.workers == 3
    assert eng.dry_run is True
    assert eng.log_level == logging.DEBUG
    assert eng.title == "Sweep"


def test_engine_rejects_zero_workers():
    with pytest.raises(ValueError, match="at least 1"):
        JobEngine(workers=0)


def test_run_returns_value(engine):
    outcome = engine.run(Job(double, {"x": 21}))
    assert outcome.ok
    assert outcome.value == 42
    assert outcome.name == "double"
    assert outcome.runtime >= 0


def test_run_captures_errors(engine, mocker):
    error_log = mocker.patch.object(engine.logger, "error")
    outcome = engine.run(Job(explode, {"x": 1}, name="boom"))
    assert not outcome.ok
    assert isinstance(outcome.error, ValueError)
    assert outcome.value is None
    error_log.assert_called_once()
    assert "boom" in error_log.call_args.args[0]


def test_run_dry_run(engine_dry_run, mocker):
    func = mocker.Mock(return_value=1)
    outcome = engine_dry_run.run(Job(func, name="skipped"))
    assert not func.called
    assert outcome.skipped
    assert not outcome.ok
    assert outcome.value is None


def test_run_all_keeps_submission_order(engine):
    outcomes = engine.run_all([Job(double, {"x": x}, name=f"x={x}") for x in (3, 1, 2)])
    assert [o.value for o in outcomes] == [6, 2, 4]
    assert [o.name for o in outcomes] == ["x=3", "x=1", "x=2"]


def test_run_all_in_process_pool():
    engine = JobEngine(workers=2)
    values = [np.full(16, 0.4), np.full(16, 0.1)]
    jobs = [Job(families.norm_lq, {"F": v, "q": 2.0}) for v in values]
    outcomes = engine.run_all(jobs)
    assert all(o.ok for o in outcomes)
    assert outcomes[0].value == pytest.approx(np.exp(0.4), rel=1e-14)
    assert outcomes[1].value == pytest.approx(np.exp(0.1), rel=1e-14)


def test_run_all_in_process_pool_reports_errors():
    engine = JobEngine(workers=2)
    jobs = [Job(families.norm_lq, {"F": np.zeros(4), "q": q}) for q in (2.0, -1.0)]
    first, second = engine.run_all(jobs)
    assert first.ok
    assert isinstance(second.error, ValueError)


# --- Job ---


def test_job_init_defaults():
    job = Job(double)
    assert job.kwargs == {}
    assert job.name == "double"
    assert job.description == "double"


def test_job_init_custom():
    job = Job(double, {"x": 1}, name="d", description="Double one")
    assert job.kwargs == {"x": 1}
    assert job.description == "Double one"


def test_job_repr():
    assert repr(Job(double, name="twice")) == "Job(name='twice')"
