"""Stabilized hybrid mixed finite elements for Biot poroelasticity.

Lowest-order displacement/pressure/velocity discretization on triangles with
edge-normal bubble stabilization, static condensation to a three-field system,
and block-preconditioned flexible GMRES solvers.
"""

__version__ = "0.1.0"
