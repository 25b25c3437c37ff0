"""Numerical laboratory for piecewise uniformly expanding maps.

Cylinder complexities and expansion rates, essential-spectral-radius bounds,
Ulam discretisations of the transfer operator, physical measures and decay
of correlations.
"""

from .bounds import (
    affine_commuting_bound,
    bv_radius_bound,
    physical_condition,
    saussol_bound,
    saussol_iterated_bound,
    search_parameters,
    sobolev_radius_bound,
)
from .complexity import (
    ComplexityReport,
    Cylinder,
    complexity_begin,
    complexity_end,
    expansion_min,
    growth_rates,
    refine,
    reports,
)
from .config import load_bundled, load_config
from .geometry import Interval, Polytope, affine_image, affine_preimage, incidence_count, intersect, volume
from .grid import Grid, GridFunction
from .kernels import BACKEND
from .maps import BOUNDARY, AffineBranch, PiecewiseMap, SmoothBranch1D, apply, branch_weight, validate
from .measures import basin_map, birkhoff, correlation, decompose_physical
from .norms import bv_norm, fubini_decompose, oscillation_seminorm, sobolev_norm
from .transfer import UlamOperator, assemble, cesaro_project, invariant_density, spectrum

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BOUNDARY",
    "AffineBranch",
    "ComplexityReport",
    "Cylinder",
    "Grid",
    "GridFunction",
    "Interval",
    "PiecewiseMap",
    "Polytope",
    "SmoothBranch1D",
    "UlamOperator",
    "affine_commuting_bound",
    "affine_image",
    "affine_preimage",
    "apply",
    "assemble",
    "basin_map",
    "birkhoff",
    "branch_weight",
    "bv_norm",
    "bv_radius_bound",
    "cesaro_project",
    "complexity_begin",
    "complexity_end",
    "correlation",
    "decompose_physical",
    "expansion_min",
    "fubini_decompose",
    "growth_rates",
    "incidence_count",
    "intersect",
    "invariant_density",
    "load_bundled",
    "load_config",
    "oscillation_seminorm",
    "physical_condition",
    "refine",
    "reports",
    "saussol_bound",
    "saussol_iterated_bound",
    "search_parameters",
    "sobolev_norm",
    "sobolev_radius_bound",
    "spectrum",
    "validate",
    "volume",
]
