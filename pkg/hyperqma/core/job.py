"""
job.py

This module provides a small wrapper around a unit of numerical work (a
callable plus its keyword arguments) to be executed by a JobEngine. Sweeps
build one Job per independent piece and hand the list to the engine.

The callable must be a module-level function so that jobs can cross process
boundaries.
"""

from typing import Callable


class Job:
    """
    A named call executed through a JobEngine.

    Attributes:
        func (Callable): Module-level function to call.
        kwargs (dict): Keyword arguments for func.
        name (str): Short label used in logs and outcomes.
        description (str): A human-readable description of the job.
    """

    def __init__(
        self,
        func: Callable,
        kwargs: dict | None = None,
        name: str | None = None,
        description: str | None = None,
    ):
        """
        Initializes a Job instance.

        Args:
            func (Callable): The function to call.
            kwargs (dict, optional): Keyword arguments. Defaults to none.
            name (str, optional): Label. Defaults to the function name.
            description (str, optional): Description for the job. Defaults to the name.
        """
        self.func = func
        self.kwargs = kwargs or {}
        self.name = name or getattr(func, "__name__", "job")
        self.description = description or self.name

    def __repr__(self):
        return f"Job(name={self.name!r})"
