"""Nodal auxiliary space preconditioning for edge and face elements on surfaces.

Meshes of closed hypersurfaces (a torus in R^3, the 3-sphere in R^4),
lowest-order P1/N0/RT0 spaces, HX preconditioners for curl-curl and
grad-div operators, and harmonic field extraction by singular MINRES.
"""

from .errors import *  # noqa: F401,F403
from .fespace import (
    AssembledOperator,
    FeSpace,
    assemble_p1,
    assemble_whitney,
    element_gradients,
    incidence_d,
    incidence_dminus,
    l2_project_rhs,
    transfer_matrix,
)
from .geometry import Sphere, Sphere3, Torus, make_surface
from .harmonic import HarmonicBasis, HodgeSaddleSystem, assemble_hodge_saddle, compute_harmonic_basis
from .krylov import SolveReport, estimate_condition, minres_singular, pcg
from .mesh import (
    MeshQualityReport,
    SurfaceMesh,
    build_s3_initial,
    build_torus_initial,
    mesh_hierarchy,
    quality,
    refine_quad,
    refine_red,
)
from .precond import BlockHodgePreconditioner, HxPreconditioner, apply_hx, build_block_hodge, build_hx
from .sparsela import InnerSolver, amg_setup, cholesky_factor, jacobi_inverse_diag

__version__ = "0.1.0"
