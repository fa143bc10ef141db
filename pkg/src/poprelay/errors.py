"""Exception types shared across the package."""


class PopRelayError(Exception):
    """Base class for every error raised by poprelay."""


class InvalidArgument(PopRelayError, ValueError):
    pass


class DuplicateKeyConflict(PopRelayError):
    """A key was submitted twice with different values (attempted double spend)."""


class NotFound(PopRelayError, KeyError):
    pass


class KeyPresent(PopRelayError):
    """An exclusion proof was requested for a key that is in the trie."""


class MalformedProof(PopRelayError, ValueError):
    pass


class InvalidState(PopRelayError):
    pass


class PeriodBoundary(PopRelayError):
    """A cumulative-strategy PoP would have to span two periods."""


class Unverifiable(PopRelayError):
    """A proof references a root that is not available to the verifier."""


class Unavailable(PopRelayError):
    """The ledger could not commit within its timeout."""


class DegenerateFit(PopRelayError, ValueError):
    pass


class InvalidDomain(PopRelayError, ValueError):
    pass


class ExtrapolationRefused(PopRelayError, ValueError):
    pass


class NoCrossover(PopRelayError):
    pass


class InconsistentParams(PopRelayError, ValueError):
    pass
