"""Carleman weight system, pointwise estimate and related identities."""
from .extension import ExtensionResult, elliptic_extension
from .families import global_family, identity_family, pointwise_family
from .global_estimate import (
    ExtensionTriple,
    GlobalReport,
    ManufacturedTriple,
    NormSet,
    check_global_estimate,
    minimal_constant,
)
from .identity import IdentityReport, check_multiplier_identity
from .pointwise import (
    PointwiseReport,
    PointwiseTerms,
    carleman_terms,
    check_derivative_table,
    check_pointwise_estimate,
    check_psi_dual,
    coercivity_threshold,
)
from .symbolic import TestFunction, VectorField
from .weight import (
    CarlemanWeight,
    LinearWeight,
    SpaceTimeGrid,
    WeightProfile,
    build_weight,
    cutoff,
    weight_profile,
)

__all__ = [
    "CarlemanWeight", "ExtensionResult", "ExtensionTriple", "GlobalReport", "IdentityReport", "LinearWeight",
    "ManufacturedTriple", "NormSet", "PointwiseReport", "PointwiseTerms", "SpaceTimeGrid", "TestFunction",
    "VectorField", "WeightProfile", "build_weight", "carleman_terms", "check_derivative_table",
    "check_global_estimate", "check_multiplier_identity", "check_pointwise_estimate", "check_psi_dual", "coercivity_threshold",
    "cutoff", "elliptic_extension", "global_family", "identity_family", "minimal_constant",
    "pointwise_family", "weight_profile",
]
