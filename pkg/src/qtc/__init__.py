"""Quantum transportation-cost inequalities for detailed-balance semigroups."""
__version__ = "0.1.0"
