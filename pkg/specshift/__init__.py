"""
SpecShift

A package to compute spectral shift functions, Witten indices and spectral flow
for finite-dimensional models of d/dt + A(t) operators.
"""

__version__ = '1.0.0'
