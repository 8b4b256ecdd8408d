from hyperqma.core.job import Job
from hyperqma.core.job_engine import JobEngine, JobOutcome
