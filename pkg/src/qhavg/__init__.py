"""Quasihyperbolic distance fields and L^s-averaging diagnostics for planar and spatial domains."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    Ball,
    BlockTower,
    BoxUnion,
    Cusp,
    DiskAndRooms,
    DomainSpec,
    GeometryError,
    RoomsAndHalls,
    UnionOf,
    UnitCube,
    rasterize,
    spec_from_dict,
    translated,
)
from .integrals import ls_integral, refinement_sweep, threshold_scan  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .solver import QhField, SolveError, solve, subset_monotonicity  # noqa: E402
from .tubes import Tube, certify_not_averaging, family_series, tube_lower_bound, verify_essential  # noqa: E402
from .weights import Weight, ar_estimate, holder_check, union_check, weighted_ls  # noqa: E402
from .whitney import chain_bound, cube_subdivision, validate_subdivision  # noqa: E402

__all__ = [
    "BACKEND", "Ball", "BlockTower", "BoxUnion", "Cusp", "DiskAndRooms", "DomainSpec", "GeometryError",
    "QhField", "RoomsAndHalls", "SolveError", "Tube", "UnionOf", "UnitCube", "Weight", "ar_estimate",
    "certify_not_averaging", "chain_bound", "cube_subdivision", "family_series", "holder_check",
    "ls_integral", "rasterize", "refinement_sweep", "solve", "spec_from_dict", "subset_monotonicity",
    "threshold_scan", "translated", "tube_lower_bound", "union_check", "validate_subdivision",
    "verify_essential", "weighted_ls",
]
