"""Exception types shared across the package."""


class BridgeGraphError(Exception):
    """Base class for all package errors."""


class UsageError(BridgeGraphError, ValueError):
    """The caller asked for something malformed (bad state, wrong noise mode...)."""


class SpecError(BridgeGraphError, ValueError):
    """A chain specification could not be parsed or is structurally invalid."""


class NotApplicable(BridgeGraphError):
    """The operation is not defined for this kind of chain (e.g. countable S)."""


class NotReady(BridgeGraphError):
    """A prerequisite estimate (typically the bi-recurrent path) has not converged."""


class CouplingFailure(BridgeGraphError):
    """Coupling from the past did not coalesce within the depth budget."""

    def __init__(self, message, depths_tried=()):
        super().__init__(message)
        self.depths_tried = tuple(depths_tried)
