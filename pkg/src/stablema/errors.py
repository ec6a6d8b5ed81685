"""Exception taxonomy shared by every module.

Each failure mode callers are expected to branch on gets its own class;
everything inherits from StablemaError so the CLI can map any library
failure to a nonzero exit in one place.
"""


class StablemaError(Exception):
    """Base class for all library errors."""


class ParameterError(StablemaError, ValueError):
    """A scalar parameter is outside its admissible range."""


class EmptyRequestError(StablemaError, ValueError):
    """A sampling request for zero variates."""


class DomainError(StablemaError, ValueError):
    """Evaluation requested at a point outside the function's domain."""


class DivergenceError(StablemaError, ValueError):
    """An integral certified divergent by its exponent preconditions."""


class AccuracyError(StablemaError, RuntimeError):
    """Adaptive quadrature could not certify the requested tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PlanningError(StablemaError, RuntimeError):
    """Grid planning exhausted its resource caps before certifying."""


class ContractError(StablemaError, RuntimeError):
    """A caller bypassed a required certification step."""


class CoverageError(StablemaError, ValueError):
    """A lookup table does not cover the requested index range."""


class HypothesisError(StablemaError, ValueError):
    """Experiment hypotheses (tail/origin exponent gates) violated."""


class ConfigError(StablemaError, ValueError):
    """Configuration file invalid; message names the offending field."""
