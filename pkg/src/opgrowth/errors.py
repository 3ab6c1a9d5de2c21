"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: resource guards exit 3, sampling
failures exit 4, everything else exits 1 (argparse handles usage as 2).
"""


class OpgrowthError(Exception):
    """Base class for all toolkit errors."""


class AddressError(OpgrowthError):
    """Malformed edge address (bad direction index, layer out of range)."""


class BoundaryError(OpgrowthError):
    """Operation stepped outside the time axis (e.g. backward from layer 0)."""


class WindowError(OpgrowthError):
    """A window or cone left the supported coordinate range."""


class ResourceLimitError(OpgrowthError):
    """A hard resource guard (enumeration size, exact-mode memory) tripped."""


class SamplingError(OpgrowthError):
    """Rejection sampling exhausted its budget without enough acceptances."""


class PreconditionError(OpgrowthError):
    """Caller violated a documented precondition."""


class InsufficientChainError(OpgrowthError):
    """A regenerating chain is too short for the requested level."""


class EmptySubsequenceError(OpgrowthError):
    """No index of the scanned subsequence was reachable."""


class UndefinedRatioError(OpgrowthError):
    """Ratio of counts requested while the denominator count is zero."""


class FitError(OpgrowthError):
    """A degenerate empirical table cannot support the requested fit."""
