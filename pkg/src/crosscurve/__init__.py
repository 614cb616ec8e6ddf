"""Sampled verifiers for nonnegative cross-curvature of cost spaces."""

from .core import (
    CostSpace,
    SegmentPath,
    VerifierConfig,
    ViolationReport,
    conv_check,
    lmp_check,
    merge_reports,
    nncc_check,
    one_convexity_check,
    pc_check,
    product_cost,
    product_segment,
    submersion_project,
    uniform_grid,
)
from .errors import CrosscurveError
from .families import FAMILIES, Family, make_family
from .gw_uot import GaugedSpace, ConePoint, cone_cost, gh_distance, gw_cost, gw_segment, gw_solve_tiny, wfr_cone_cost
from .mtw import SmoothCost, c_segment_solve, mtw_tensor, nncc_scan
from .transport import DiscreteMeasure, counterexample_lmp, glue, lifted_segment, ot_solve, wasserstein_nncc_check

__version__ = "0.1.0"
