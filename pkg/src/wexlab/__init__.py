"""Numerical verification of weighted norm inequalities on dyadic grids."""

from .exponents import (
    INF, LimitedRange, BoundFunction, buckley_bound, diag_extrapolation_constant,
    exponent, gamma_extrapolation, rh_gamma, tau,
)
from .grid import Grid, GridFunction, build_lattices, read_grid_function, write_grid_function
from .maximal import dyadic_maximal, uncentered_maximal, vector_maximal
from .report import CheckRecord, VerificationReport
from .weights import ClassSpec, estimate_characteristic, verify_percube
from .extrapolation import (
    extrapolate_weight_diag, extrapolate_weight_offdiag, rdf_certify, rdf_iterate,
    stein_weiss_combine,
)
from .sparse import SparseFamily, cz_sparse_dominate, sparse_form, sparse_operator
from .scans import buckley_sharpness_scan, empirical_norm_probe, fs_vector_scan
from .suites import Scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "INF", "LimitedRange", "BoundFunction", "buckley_bound", "diag_extrapolation_constant",
    "exponent", "gamma_extrapolation", "rh_gamma", "tau", "Grid", "GridFunction",
    "build_lattices", "read_grid_function", "write_grid_function", "dyadic_maximal",
    "uncentered_maximal", "vector_maximal", "CheckRecord", "VerificationReport", "ClassSpec",
    "estimate_characteristic", "verify_percube", "extrapolate_weight_diag",
    "extrapolate_weight_offdiag", "rdf_certify", "rdf_iterate", "stein_weiss_combine",
    "SparseFamily", "cz_sparse_dominate", "sparse_form", "sparse_operator",
    "buckley_sharpness_scan", "empirical_norm_probe", "fs_vector_scan", "Scenario",
    "run_scenario",
]
