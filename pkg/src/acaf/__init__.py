"""Exact-arithmetic toolkit for almost conformally almost Fedosov (ACAF) structures.

The package works on a single flat coordinate chart. Tensors carry exact
rational or rational-polynomial entries, and every identity is checked with
equality rather than a tolerance.
"""

__version__ = "0.1.0"
