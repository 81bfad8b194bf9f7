"""Multi-target tracking with PHD filters and Palm-corrected track extraction."""

from .exceptions import PalmTrackError
from .metrics import OspaParams, RunRecord, aggregate, ospa, ospa_components
from .models import MeasurementModel, MotionModel
from .oracle import DiscreteModel, enumerate_posterior, oracle_moments
from .palm_extract import ExtractionResult, ExtractorParams, TrackEstimate, extract
from .pointproc import (
    CanonicalPmf,
    CardinalityStrategy,
    EvalMode,
    PalmMethod,
    PalmModulation,
    PhdPosteriorContext,
    build_context,
    c1,
    c2,
    c3,
    canonical_estimate,
    canonical_pmf,
    conditional_track_pdf,
    iid_cluster_ratio,
    pair_correlation,
    palm_modulation,
    reduced_palm_intensity,
)
from .runner import RunConfig, run_monte_carlo, run_single, track_scans
from .scenario import Scan, ScenarioConfig, generate_measurements, generate_truth

__version__ = "0.1.0"

__all__ = [
    "CanonicalPmf",
    "CardinalityStrategy",
    "DiscreteModel",
    "EvalMode",
    "ExtractionResult",
    "ExtractorParams",
    "MeasurementModel",
    "MotionModel",
    "OspaParams",
    "PalmMethod",
    "PalmModulation",
    "PalmTrackError",
    "PhdPosteriorContext",
    "RunConfig",
    "RunRecord",
    "Scan",
    "ScenarioConfig",
    "TrackEstimate",
    "aggregate",
    "build_context",
    "c1",
    "c2",
    "c3",
    "canonical_estimate",
    "canonical_pmf",
    "conditional_track_pdf",
    "enumerate_posterior",
    "extract",
    "generate_measurements",
    "generate_truth",
    "iid_cluster_ratio",
    "oracle_moments",
    "ospa",
    "ospa_components",
    "pair_correlation",
    "palm_modulation",
    "reduced_palm_intensity",
    "run_monte_carlo",
    "run_single",
    "track_scans",
]
