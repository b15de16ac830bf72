"""Exception types shared across the toolkit.

The CLI maps these to exit codes: input/validation problems exit 1,
numerical failures exit 2.
"""


class ThinRodError(Exception):
    """Base class for all toolkit errors."""


class InputError(ThinRodError):
    """Invalid argument or field value supplied by the caller."""


class ConfigError(InputError):
    """Malformed or unsupported run configuration."""


class MeshError(InputError):
    """Invalid or degenerate mesh."""


class NumericalError(ThinRodError):
    """A solver failed to reach its stated tolerance."""


class ConvergenceError(NumericalError):
    """Iterative minimization did not converge."""


class InsufficientDataError(InputError):
    """Not enough data points for the requested statistic."""
