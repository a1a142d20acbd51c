"""
lpcm - Lp compressed modes on triangle meshes.

Compactly supported quasi-eigenfunctions of the Laplace-Beltrami operator
computed by ADMM, and their use for mesh segmentation and genus-0 patching.
"""

__version__ = "1.0.0"

from .errors import (
    ConfigError,
    CoverageError,
    LpcmError,
    MeshError,
    SegmentationError,
    SolverError,
    TopologyError,
)
from .mesh import TopologySummary, TriMesh, submesh, topology, triangle_area
from .mesh_io import load_mesh, write_ply, write_vtk
from .operators import MeshOperators, cotan_stiffness, lumped_mass, weighted_lp_norm_p
from .models import ModeSet, Partition, PatchReport, SolverConfig
from .admm import solve
from .basis import build_grow_mu, build_grow_N, coverage
from .segmentation import refine_patches, region_grow, select_seeds
from .spectral import mhb, reconstruct

__all__ = [
    "ConfigError",
    "CoverageError",
    "LpcmError",
    "MeshError",
    "SegmentationError",
    "SolverError",
    "TopologyError",
    "TopologySummary",
    "TriMesh",
    "submesh",
    "topology",
    "triangle_area",
    "load_mesh",
    "write_ply",
    "write_vtk",
    "MeshOperators",
    "cotan_stiffness",
    "lumped_mass",
    "weighted_lp_norm_p",
    "ModeSet",
    "Partition",
    "PatchReport",
    "SolverConfig",
    "solve",
    "build_grow_mu",
    "build_grow_N",
    "coverage",
    "refine_patches",
    "region_grow",
    "select_seeds",
    "mhb",
    "reconstruct",
]
