"""Partial-wave spectral toolkit for wave and Dirac flows on R^n.

Channelwise Hankel propagators for the half-wave flow, the Thaller channel
structure of the 3D massless Dirac operator, unitary Crank-Nicolson steppers
for radial potentials, a split-step solver for the cubic Dirac equation, and
a verification harness that measures both sides of each space-time estimate
on reproducible random ensembles.
"""

__version__ = "0.1.0"
