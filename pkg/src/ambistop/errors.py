class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class NoExperimentation(Exception):
    """Experimentation is never optimal for this cost (c >= c_bar)."""


class RegionError(ValueError):
    """A region-specific query was made outside that region."""


class Unsupported(Exception):
    """Configuration outside the regime an operation covers."""


class NoPreemptiveStop(Exception):
    """The pure-strategy stop state does not exist (ambiguity too small)."""


class LargeDelta(Exception):
    """The small-ambiguity diffusion construction breaks down."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge."""
