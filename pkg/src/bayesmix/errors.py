"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class AlphabetError(DomainError):
    """An action or percept is not part of the environment's alphabet."""


class ValidationError(ValueError):
    """A specification failed validation.

    ``field`` names the offending entry with a path such as
    ``environments[1].transitions[0][2]``.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class UndefinedConditionalError(DomainError):
    """A conditional probability was requested on a zero-probability history."""


class IncompletePolicyError(KeyError):
    """A policy table has no entry for a reachable history."""


class BudgetError(RuntimeError):
    """A computation would exceed its configured enumeration or node budget."""
