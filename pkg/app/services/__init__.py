"""
Service classes for the application.

Each service wraps one concern of the numerical core (sampling, calculus,
dynamics, verification) or of the batch runner (fixtures, jobs, artifacts),
keeping the CLI focused on argument handling.
"""

__all__: list[str] = []
