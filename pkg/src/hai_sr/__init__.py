"""Hierarchical active inference over successor representations."""

from __future__ import annotations

__version__ = "0.1.0"

from . import abstraction, core_model, successor
from .core_model import GenerativeModel, belief_update, efe_vector, make_preference
from .successor import SuccessorMatrix, analytic_sr, efe_value

__all__ = [
    "GenerativeModel",
    "SuccessorMatrix",
    "abstraction",
    "analytic_sr",
    "belief_update",
    "core_model",
    "efe_value",
    "efe_vector",
    "make_preference",
    "successor",
    "__version__",
]
