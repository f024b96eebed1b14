"""Exact finite-level models of flows built under a function over product
measures, their approximate-transitivity certificates, and a product
odometer laboratory."""
from .errors import (Boundary, DepthExceeded, EnumerationTooLarge, ErgoflowError, InfeasibleModel,
                     ParseError, PrefixTooShort, ResidueMismatch, TimeOutOfRange, Undecided,
                     ValidationError)
from .numerics import LogLinearForm, MultiplicativeRelations, Ordering, compare, sign
from .spaces import Epsilon0, QuotientCylinder, SequenceSpec, constant, dyadic, mixed, toy2

__all__ = [
    "Boundary", "DepthExceeded", "EnumerationTooLarge", "ErgoflowError", "InfeasibleModel",
    "ParseError", "PrefixTooShort", "ResidueMismatch", "TimeOutOfRange", "Undecided",
    "ValidationError", "LogLinearForm", "MultiplicativeRelations", "Ordering", "compare", "sign",
    "Epsilon0", "QuotientCylinder", "SequenceSpec", "constant", "dyadic", "mixed", "toy2",
]
