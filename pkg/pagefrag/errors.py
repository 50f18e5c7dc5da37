# errors.py
"""Exception hierarchy shared by every pagefrag module."""


class PageFragError(Exception):
    """Base class for all domain errors raised by pagefrag."""


class ParseError(PageFragError):
    """A snapshot, app definition, test plan or dataset file could not be read."""


class InvariantError(PageFragError):
    """A loaded structure violates a tree or layout invariant."""


class InvalidConfig(PageFragError):
    """A configuration value is out of range or inconsistent."""


class NodeNotInFragment(PageFragError):
    pass


class RecursionDepthExceeded(PageFragError):
    """Fragment classification recursed deeper than CompareConfig.max_depth."""


class UnregisteredFragment(PageFragError):
    pass


class StaleActionable(PageFragError):
    """An actionable locator does not resolve to exactly one node in the current page."""


class BacktrackFailed(PageFragError):
    """A recorded transition path no longer leads back to its target state."""


class EmptyModel(PageFragError):
    pass


class EmptyGroundTruth(PageFragError):
    pass


class LengthMismatch(PageFragError):
    pass


class NoEligibleNode(PageFragError):
    """The snapshot has no node a mutation operator may target."""


class MisalignedTrace(PageFragError):
    """A test trace does not cover the model states being mutated."""


class MalformedTest(PageFragError):
    pass
