"""Exception types shared across the package.

Anything raised deliberately by this package derives from SimtruthError,
so callers can catch one base class. ValueError is still used for plain
argument misuse (empty grids, out-of-range counts, and the like).
"""

from __future__ import annotations


class SimtruthError(Exception):
    """Base class for errors raised by simtruth."""


class ValidationError(SimtruthError):
    """A DGM failed structural validation.

    Carries the full list of violation messages so callers can report
    every problem at once instead of fixing them one at a time.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid DGM")


class DegenerateProbabilityError(SimtruthError):
    """A potential-outcome mean hit 0 or 1, so an odds or ratio scale
    contrast is undefined. Never silently clamped."""


class IngestionError(SimtruthError):
    """An empirical data file could not be read as requested."""


class SeparationError(SimtruthError):
    """Logistic fit diverged: some coefficient ran away, which is the
    numerical signature of (quasi-)separated data."""


class SingularityError(SimtruthError):
    """The information matrix of a fit is singular (collinear design)."""


class EstimationError(SimtruthError):
    """An estimator could not produce a usable estimate on a dataset."""


class ConfigError(SimtruthError):
    """Base class for configuration problems (exit code 2 in the CLI)."""


class ConfigParseError(ConfigError):
    """The config file is not syntactically valid."""


class UnknownKeyError(ConfigError):
    """The config contains a key the schema does not define."""


class RangeViolationError(ConfigError):
    """A numeric config field is outside its allowed range."""


class DanglingReferenceError(ConfigError):
    """A config cross-reference names something that does not exist."""
