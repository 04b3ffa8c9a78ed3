"""Exception hierarchy shared by all modules."""


class HypmeasError(Exception):
    """Base class for library errors."""


class DomainError(HypmeasError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConstructionError(HypmeasError, ValueError):
    """An object could not be built from the given parameters."""


class QuadratureError(HypmeasError, ArithmeticError):
    """Adaptive quadrature exceeded its subdivision budget."""


class BudgetError(HypmeasError, RuntimeError):
    """A Monte Carlo or search budget is too small or was exhausted."""


class ConvergenceError(HypmeasError, RuntimeError):
    """An iterative procedure failed to converge."""


class HypothesisError(HypmeasError, ValueError):
    """The inputs violate a precondition of the procedure (e.g. a
    nonpositive initial integral for localization)."""
