"""Exception types raised by eidsim."""


class EidError(Exception):
    """Base class for all eidsim errors."""


class InvalidPartitionError(EidError, ValueError):
    """A factor subset does not define a nonempty proper bipartition."""


class DomainError(EidError, ValueError):
    """An operator lies outside the domain of an operation (e.g. not Hermitian)."""


class DimensionMismatchError(EidError, ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class StructureError(EidError, ValueError):
    """A Hamiltonian lacks the structure required by the requested evolution path."""


class ModelViolationError(EidError, RuntimeError):
    """The evolved state left the correlated branch form."""


class InvariantBreachError(EidError, RuntimeError):
    """A conserved quantity drifted beyond its tolerance."""


class ConfigError(EidError, ValueError):
    """An experiment configuration failed validation."""
