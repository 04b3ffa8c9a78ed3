"""Alpha-concave measures, needles, dilations and concentration bounds in R^n."""
from .core import (
    NEG_INF,
    POS_INF,
    AffineForm,
    AlphaParam,
    ExtReal,
    alpha_from_beta,
    as_alpha,
    beta_from_alpha,
    generalized_mean,
)
from .errors import (
    BudgetError,
    ConstructionError,
    ConvergenceError,
    DomainError,
    HypmeasError,
    HypothesisError,
    QuadratureError,
)

__version__ = "0.1.0"

__all__ = [
    "NEG_INF",
    "POS_INF",
    "AffineForm",
    "AlphaParam",
    "ExtReal",
    "alpha_from_beta",
    "as_alpha",
    "beta_from_alpha",
    "generalized_mean",
    "BudgetError",
    "ConstructionError",
    "ConvergenceError",
    "DomainError",
    "HypmeasError",
    "HypothesisError",
    "QuadratureError",
]
