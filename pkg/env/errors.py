"""
env/errors.py
Exception hierarchy shared by every package of the project.
"""
from typing import Optional


class ParlError(Exception):
    """Base class for all errors raised by this project."""


class ConfigError(ParlError):
    """A network configuration document could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ContractViolation(ParlError):
    """A simulator precondition was broken by the caller."""


class NetworkShapeError(ParlError):
    """Critic parameters or inputs have incompatible dimensions."""


class FitError(ParlError):
    """Critic fitting could not run or diverged."""


class BoundsError(ParlError):
    """Bound propagation was asked for an unbounded or malformed box."""


class ModelError(ParlError):
    """A MILP could not be assembled or read."""


class SolverError(ParlError):
    """A solve routine failed to produce an answer."""

    def __init__(self, message: str, hint: Optional[str] = None):
        self.hint = hint
        super().__init__(f"{message} ({hint})" if hint else message)


class SamplingError(ParlError):
    """Demand samples could not be generated."""


class HeuristicError(ParlError):
    """A baseline policy could not be parameterized."""


class ExperimentError(ParlError):
    """An experiment spec is malformed or names an unknown method."""
