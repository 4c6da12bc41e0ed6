"""Exact directional limiting normal cones, subdifferentials and coderivatives
for finite unions of convex polyhedra and piecewise affine data."""
from .applications import (
    FirstOrderData,
    NCPData,
    StabilityVerdict,
    aubin_witness_search,
    check_aubin_implicit,
    check_dir_subregularity,
    check_subtransversality,
    ncp_first_order,
    refined_limiting_bound,
)
from .cones import (
    UnionSet,
    dir_limiting_normal_cone,
    enumerate_direction_strata,
    frechet_normal_cone,
    limiting_normal_cone,
    tangent_cone,
)
from .errors import (
    DimensionError,
    DirCalcError,
    DomainError,
    EmptySet,
    PointNotInGraph,
    PointNotInImage,
    PointNotInSet,
    ResourceLimit,
    UnboundedBelow,
)
from .functions import (
    PWAFunc,
    analytic_dir_subdif,
    chain_bound,
    dir_subdif,
    graph_deriv_values,
    max_bound,
    min_bound,
    partial_bound,
    separable_bound,
    singular_dir_subdif,
    sum_bound,
    value_function_bound,
)
from .geometry import ConeUnion, HPoly, VCone
from .multimaps import (
    CoderivResult,
    PolyMap,
    chain_bound_coder,
    dir_coderivative,
    graphical_derivative,
    scalarization_check,
    sum_bound_coder,
)
from .oracle import SampleSchedule, approx_dir_limiting, approx_vertical, gamma_classify
from .rules import (
    PWAMap,
    QCStatus,
    Verdict,
    constraint_bound,
    image_bound,
    intersection_bound,
    preimage_bound,
    qc_foscms,
    union_bound,
)

__version__ = "0.1.0"

__all__ = [
    "CoderivResult",
    "ConeUnion",
    "DimensionError",
    "DirCalcError",
    "DomainError",
    "EmptySet",
    "FirstOrderData",
    "HPoly",
    "NCPData",
    "PWAFunc",
    "PWAMap",
    "PointNotInGraph",
    "PointNotInImage",
    "PointNotInSet",
    "PolyMap",
    "QCStatus",
    "ResourceLimit",
    "SampleSchedule",
    "StabilityVerdict",
    "UnboundedBelow",
    "UnionSet",
    "VCone",
    "Verdict",
    "analytic_dir_subdif",
    "approx_dir_limiting",
    "approx_vertical",
    "aubin_witness_search",
    "chain_bound",
    "chain_bound_coder",
    "check_aubin_implicit",
    "check_dir_subregularity",
    "check_subtransversality",
    "constraint_bound",
    "dir_coderivative",
    "dir_limiting_normal_cone",
    "dir_subdif",
    "enumerate_direction_strata",
    "frechet_normal_cone",
    "gamma_classify",
    "graph_deriv_values",
    "graphical_derivative",
    "image_bound",
    "intersection_bound",
    "limiting_normal_cone",
    "max_bound",
    "min_bound",
    "ncp_first_order",
    "partial_bound",
    "preimage_bound",
    "qc_foscms",
    "refined_limiting_bound",
    "scalarization_check",
    "separable_bound",
    "singular_dir_subdif",
    "sum_bound",
    "sum_bound_coder",
    "tangent_cone",
    "union_bound",
    "value_function_bound",
]
