"""hexfit: all-hexahedral mesh quality optimization with exact surface fitting.

Improves the worst scaled Jacobian of an all-hex mesh while constraining its
boundary vertices to an input triangle surface (corners pinned, sharp-edge
vertices confined to their curves, face vertices free on the surface). The
constrained problem is solved with an augmented Lagrangian, L-BFGS search
directions, Armijo backtracking, and periodic smart Laplacian smoothing.
"""

from ._kernels import BACKEND
from .mesh import (
    BoundarySurface, FeatureBindings, HexMesh, MeshError, SurfaceBinding,
    TriSurface, classify_boundary_vertices, extract_boundary, grid_hex_mesh,
    validate_tri_surface,
)
from .optimizer import ALParams, ConvergenceLog, LbfgsHistory, OptimizeConfig, \
    OptimizeResult, optimize
from .projection import TriangleBVH
from .quality import HexQuality, QualityReport, hex_quality, quality_report

__all__ = [
    "BACKEND", "ALParams", "BoundarySurface", "ConvergenceLog",
    "FeatureBindings", "HexMesh", "HexQuality", "LbfgsHistory", "MeshError",
    "OptimizeConfig", "OptimizeResult", "QualityReport", "SurfaceBinding",
    "TriSurface", "TriangleBVH", "classify_boundary_vertices",
    "extract_boundary", "grid_hex_mesh", "hex_quality", "optimize",
    "quality_report", "validate_tri_surface",
]

__version__ = "0.1.0"
