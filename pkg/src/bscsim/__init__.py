"""Simulator for HTTP adaptive streaming with backward-shifted SVC blocks."""

from .adapt import (
    AdaptationContext,
    AdaptationDecision,
    AdjustmentFunction,
    PolicyParams,
    ThroughputEstimator,
    make_policy,
)
from .core import DEFAULT_LADDER_KBPS, BitrateLadder, Manifest, block_sizes
from .engine import SimulationResult, run_session
from .metrics import SessionMetrics, aggregate, session_metrics
from .network import CapacityTrace, SyntheticTraceConfig, download_time, generate_synthetic, load_trace

__version__ = "0.1.0"

__all__ = [
    "AdaptationContext",
    "AdaptationDecision",
    "AdjustmentFunction",
    "BitrateLadder",
    "CapacityTrace",
    "DEFAULT_LADDER_KBPS",
    "Manifest",
    "PolicyParams",
    "SessionMetrics",
    "SimulationResult",
    "SyntheticTraceConfig",
    "ThroughputEstimator",
    "aggregate",
    "block_sizes",
    "download_time",
    "generate_synthetic",
    "load_trace",
    "make_policy",
    "run_session",
    "session_metrics",
]
