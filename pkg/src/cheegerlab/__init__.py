"""Cheeger constants and Cheeger N-clusters on pixel grids.

The package discretizes a planar domain as a pixel mask, minimizes the
summed per-component total variation over skeleton-valued unit-mass fields
with a primal-dual scheme, extracts optimal partitions as superlevel sets,
and cross-checks everything against analytic constants and an exhaustive
pixel-set oracle.
"""

from .extract import (
    ClusterResult,
    EigenBounds,
    RatioProfile,
    eigen_bounds,
    eval_h2,
    extract_cluster,
    indicator_lift,
    measure_set,
    ratio_profile,
)
from .grid import (
    GridDomain,
    MultiField,
    ScalarField,
    load_mask,
    make_barbell,
    make_disc,
    make_square,
    rasterize_polygon,
)
from .oracle import analytic_disc, analytic_square, brute_force_hn
from .skeleton import merge_signed, normalize_l1, project_sigma, split_signed
from .solver import (
    SolverConfig,
    SolverInfeasibleError,
    SolverReport,
    psi_perturb,
    solve_lambda_n,
    solve_m2,
    upper_bound_balls,
)
from .tvops import DualField, coarea_check, divergence, energy_star, gradient, tv

__all__ = [
    "GridDomain", "ScalarField", "MultiField",
    "make_disc", "make_square", "make_barbell", "load_mask", "rasterize_polygon",
    "DualField", "gradient", "divergence", "tv", "energy_star", "coarea_check",
    "project_sigma", "normalize_l1", "split_signed", "merge_signed",
    "SolverConfig", "SolverReport", "SolverInfeasibleError",
    "solve_lambda_n", "solve_m2", "upper_bound_balls", "psi_perturb",
    "ClusterResult", "RatioProfile", "EigenBounds",
    "measure_set", "ratio_profile", "extract_cluster", "indicator_lift",
    "eval_h2", "eigen_bounds",
    "analytic_disc", "analytic_square", "brute_force_hn",
]

__version__ = "0.1.0"
