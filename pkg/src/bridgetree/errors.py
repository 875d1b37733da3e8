"""Exception types shared across the package.

Two failure families matter to callers (and to the CLI exit codes):
malformed inputs vs. numerical trouble during a solve.
"""


class ValidationError(ValueError):
    """Invalid input: bad measure data, shape mismatch, cap exceeded, etc."""


class SolverError(RuntimeError):
    """Numerical failure, e.g. Sinkhorn did not converge under a strict config."""
