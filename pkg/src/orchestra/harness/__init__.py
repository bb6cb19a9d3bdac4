"""Deterministic multi-region simulation of the orchestration experiments."""

from .experiment import (
    DEFAULT_INPUT_SIZES,
    DEFAULT_REPETITIONS,
    MODES,
    ExperimentConfig,
    local_engine,
    remote_engine,
    run_experiment,
    run_modes,
)
from .network import SimDirectory, SimNetwork, SimProbeChannel, TransferLedger
from .patterns import PATTERNS, generate_descriptions, generate_workflow, pattern_resolver
from .report import RunRecord, RunReport, compute_report
from .topology import (
    NetworkModel,
    OutputSize,
    PairJitter,
    Region,
    SimulatedService,
    Topology,
    build_topology,
    continental_topology,
    intercontinental_topology,
)

__all__ = [
    "DEFAULT_INPUT_SIZES",
    "DEFAULT_REPETITIONS",
    "MODES",
    "PATTERNS",
    "ExperimentConfig",
    "NetworkModel",
    "OutputSize",
    "PairJitter",
    "Region",
    "RunRecord",
    "RunReport",
    "SimDirectory",
    "SimNetwork",
    "SimProbeChannel",
    "SimulatedService",
    "Topology",
    "TransferLedger",
    "build_topology",
    "compute_report",
    "continental_topology",
    "generate_descriptions",
    "generate_workflow",
    "intercontinental_topology",
    "local_engine",
    "pattern_resolver",
    "remote_engine",
    "run_experiment",
    "run_modes",
]
