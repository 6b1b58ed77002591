"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class NetregError(Exception):
    """Base class for library errors."""


class ConfigurationError(NetregError, ValueError):
    """Invalid model or experiment configuration."""


class DegenerateGraphError(NetregError, ValueError):
    """The graph (or a block of it) carries no information for the request,
    e.g. an estimated density of zero."""


class ComplexityError(NetregError):
    """A brute-force path was asked to exceed its documented size cap."""


class CapabilityError(NetregError, NotImplementedError):
    """The requested combination of inputs has no implemented kernel."""


class RankDeficiencyError(NetregError, ArithmeticError):
    """A Gram-type matrix is numerically singular."""

    def __init__(self, message: str, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class SchemaError(NetregError, ValueError):
    """Input file does not match the expected layout."""


class BootstrapFailure(NetregError, RuntimeError):
    """Too many bootstrap replicates had to be discarded."""
