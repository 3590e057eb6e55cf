"""Exception hierarchy shared by every module."""


class ApproachabilityError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ApproachabilityError, ValueError):
    """Inputs have the wrong shape, dimension or range."""


class InfeasibleError(ApproachabilityError):
    """A linear system or constraint set has no solution."""


class InfeasibleFlagError(InfeasibleError):
    """A flag lies outside the range of the maximal informative mapping."""


class NoNormalError(ApproachabilityError):
    """A proximal normal was requested at a point inside the set."""


class InvalidWitnessError(ApproachabilityError):
    """An exclusion witness does not keep the payoffs away from the target."""


class InsufficientExplorationError(ApproachabilityError):
    """Some action was never explored, so its signal law cannot be estimated."""


class ConfigError(ApproachabilityError):
    """A run configuration or input file is malformed."""
