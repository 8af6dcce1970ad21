"""Exception types shared across the package."""


class OrderedCapacityError(Exception):
    """Base class for package-specific failures."""


class ConfigError(OrderedCapacityError):
    """Malformed or incomplete experiment configuration."""


class LevelError(OrderedCapacityError):
    """A server level beyond the available rate prefix (or n_max) was requested."""


class CapacityError(OrderedCapacityError):
    """A rate prefix exhausts (or exceeds) the total service capacity."""


class NumericDegeneracyError(OrderedCapacityError):
    """A recursion denominator or summation degenerated below usable precision."""


class NoRootError(OrderedCapacityError):
    """A fixed-point or root-finding problem has no root in the admissible range."""


class OptimizerError(OrderedCapacityError):
    """The rate optimizer could not make progress from any probe point."""


class InsufficientDataError(OrderedCapacityError):
    """Too few simulated events to form the requested statistic."""
