"""Exploration-by-optimisation, mirror descent and information-directed sampling for online learning."""
from .errors import (
    ArgumentError,
    BudgetExhausted,
    DomainError,
    InfeasibleStep,
    InfostabError,
    PreconditionError,
    ValidationError,
    ZeroPosterior,
    ZeroProbability,
)
from .games import DecisionSet, Game, build_standard
from .geometry import Potential

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "BudgetExhausted", "DecisionSet", "DomainError", "Game", "InfeasibleStep",
    "InfostabError", "Potential", "PreconditionError", "ValidationError", "ZeroPosterior",
    "ZeroProbability", "build_standard",
]
