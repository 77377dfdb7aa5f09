"""Validated numerics for Fibonacci renormalization and wild attractors."""

from .rigor import IInterval

__all__ = ["IInterval"]
__version__ = "0.1.0"
