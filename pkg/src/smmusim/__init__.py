"""Discrete-event model of a decentralized IOMMU shared by DMA masters."""

from .experiments import (
    Calibration,
    ExperimentKind,
    ExperimentSpec,
    LatencySummary,
    ProbeResult,
    Scenario,
    ThroughputRow,
    default_calibration,
    probe_micro_tlb_depth,
    run_latency_experiment,
    run_throughput_experiment,
)
from .simcore import ClockDomain, Engine
from .smmu import LatencyParams, Path, PmuEvent, SmmuConfig, SmmuModel
from .tlb import Access, Replacement, TlbConfig, TranslationCache

__version__ = "0.1.0"

__all__ = [
    "Access",
    "Calibration",
    "ClockDomain",
    "Engine",
    "ExperimentKind",
    "ExperimentSpec",
    "LatencyParams",
    "LatencySummary",
    "Path",
    "PmuEvent",
    "ProbeResult",
    "Replacement",
    "Scenario",
    "SmmuConfig",
    "SmmuModel",
    "ThroughputRow",
    "TlbConfig",
    "TranslationCache",
    "default_calibration",
    "probe_micro_tlb_depth",
    "run_latency_experiment",
    "run_throughput_experiment",
]
