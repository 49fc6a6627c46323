"""Twistor lifts of harmonic maps into Grassmannians and related symmetric spaces."""

from .bundle import AnalyticMap, MovingSubbundle, compute_Az, predicates
from .errors import (
    CapacityError,
    ContractError,
    DomainError,
    GenericPointError,
    NotNormalizedError,
    PoleError,
    TwistorLiftError,
)
from .grassmodel import ExtendedSolution, GrassModel, segal_filtration, uhlenbeck_filtration
from .twistor import (
    LiftReport,
    MovingFlag,
    burstall_lift,
    canonical_lift,
    real_ocs_lift,
    strongly_conformal_lifts,
    uniton_anchored_lift,
)
from .verify import Report, SampleGrid, compare_subbundles, run_suite

__version__ = "0.1.0"

__all__ = [
    "AnalyticMap",
    "CapacityError",
    "ContractError",
    "DomainError",
    "ExtendedSolution",
    "GenericPointError",
    "GrassModel",
    "LiftReport",
    "MovingFlag",
    "MovingSubbundle",
    "NotNormalizedError",
    "PoleError",
    "Report",
    "SampleGrid",
    "TwistorLiftError",
    "burstall_lift",
    "canonical_lift",
    "compare_subbundles",
    "compute_Az",
    "predicates",
    "real_ocs_lift",
    "run_suite",
    "segal_filtration",
    "strongly_conformal_lifts",
    "uhlenbeck_filtration",
    "uniton_anchored_lift",
]
