"""Space-time Galerkin boundary element solver for the 3D wave equation.

Sound-hard (Neumann) scattering via a retarded double layer ansatz and the
hypersingular operator, with smooth compactly supported temporal basis
functions, a block Hessenberg system matrix, and deflated/recursively
preconditioned GMRES variants.
"""

__version__ = "0.1.0"
