"""Exception types shared across the package."""


class InfostabError(Exception):
    pass


class DomainError(InfostabError, ValueError):
    """A point lies outside the domain required by a potential or divergence."""


class ValidationError(InfostabError, ValueError):
    """A game or decision set violates one of the standing assumptions."""

    def __init__(self, message, assumption=None, witness=None):
        super().__init__(message)
        self.assumption = assumption
        self.witness = witness


class ArgumentError(InfostabError, ValueError):
    pass


class PreconditionError(ArgumentError):
    """An audit was called outside the parameter range where its inequality is claimed."""


class InfeasibleStep(InfostabError, RuntimeError):
    pass


class ZeroProbability(InfostabError, ValueError):
    pass


class ZeroPosterior(InfostabError, ValueError):
    pass


class BudgetExhausted(InfostabError, RuntimeError):
    """Raised by the saddle-point solvers; ``solution`` holds the best iterate found."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
