"""Experiment configurations and the orchestration-mode simulations.

Centralized modes deploy the whole workflow on one engine, which then
carries every request and response itself. Distributed mode runs the
real partitioning pipeline on the initiating engine, ships each
composite to its selected peer, and measures until the sink engine
holds all final outputs. Both paths execute the same engine runtime
over the same simulated fabric; only the orchestration differs.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Optional

from ..dsl import SourceUnit, parse, resolve_descriptions, typecheck
from ..engine import DeployMessage, Engine, RunState, Value, ValueEnvelope, ValueMessage
from ..errors import ConfigError
from ..graph import build_graph
from ..partitioner import SizeEstimator, compose, decompose, generate_uid, place
from ..sim import EventLoop
from .network import SimDirectory, SimNetwork
from .patterns import PATTERNS, generate_workflow, pattern_resolver
from .report import RunRecord, RunReport, compute_report
from .topology import Topology

log = logging.getLogger(__name__)

MODES = ("centralized_local", "centralized_remote", "centralized", "distributed")

DEFAULT_INPUT_SIZES = tuple(float(mb) for mb in range(1, 22))
DEFAULT_REPETITIONS = 20


def _stable_seed(*parts: object) -> int:
    digest = hashlib.md5(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class ExperimentConfig:
    pattern: str
    service_count: int
    mode: str
    input_sizes: tuple[float, ...] = DEFAULT_INPUT_SIZES
    repetitions: int = DEFAULT_REPETITIONS
    rng_seed: int = 0
    central_engine: Optional[str] = None
    initiator_engine: Optional[str] = None

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ConfigError(f"unknown pattern {self.pattern!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.service_count < 2:
            raise ConfigError(f"service_count must be >= 2, got {self.service_count}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.input_sizes:
            raise ConfigError("input_sizes must be non-empty")


def _majority_service_region(topology: Topology) -> str:
    counts: dict[str, int] = {}
    for s in topology.services.values():
        counts[s.region] = counts.get(s.region, 0) + 1
    return max(sorted(counts), key=lambda r: counts[r])


def local_engine(topology: Topology) -> str:
    region = _majority_service_region(topology)
    candidates = sorted(e.id for e in topology.engines.values() if e.region == region)
    if not candidates:
        raise ConfigError(f"no engine co-regional with the services (region {region!r})")
    return candidates[0]


def remote_engine(topology: Topology) -> str:
    region = _majority_service_region(topology)
    candidates = sorted(e.id for e in topology.engines.values() if e.region != region)
    if not candidates:
        raise ConfigError("no engine outside the service region")
    return candidates[0]


def _engine_for_mode(cfg: ExperimentConfig, topology: Topology) -> str:
    if cfg.mode == "centralized_local":
        return cfg.central_engine or local_engine(topology)
    if cfg.mode == "centralized_remote":
        return cfg.central_engine or remote_engine(topology)
    if cfg.mode == "centralized":
        return cfg.central_engine or sorted(topology.engines)[0]
    return cfg.initiator_engine or _default_initiator(topology)


def _default_initiator(topology: Topology) -> str:
    try:
        return local_engine(topology)
    except ConfigError:
        return sorted(topology.engines)[0]


def _with_uid(src: SourceUnit, uid: str) -> SourceUnit:
    lines = src.text.splitlines()
    return SourceUnit("\n".join([lines[0], f"uid {uid}"] + lines[1:]) + "\n", src.origin)


def _build_engines(env: EventLoop, net: SimNetwork, topology: Topology, resolver) -> dict[str, Engine]:
    engines: dict[str, Engine] = {}
    for info in topology.engines.values():
        engine = Engine(info, env, net.transport_for(info.id),
                        SimDirectory(net, info.id), resolver)
        net.register(info.id, engine.handle_message)
        engines[info.id] = engine
    return engines


def _check_topology(cfg: ExperimentConfig, topology: Topology) -> None:
    missing = [
        f"Service{i}" for i in range(1, cfg.service_count + 1)
        if f"Service{i}" not in topology.services
    ]
    if missing:
        raise ConfigError(f"topology lacks services required by the workflow: {missing}")


def _simulate_centralized(topology: Topology, engine_id: str, source: SourceUnit,
                          resolver, input_mb: float, tie_seed: int):
    env = EventLoop(tie_seed=tie_seed)
    net = SimNetwork(env, topology)
    engines = _build_engines(env, net, topology, resolver)
    engine = engines[engine_id]
    ast = parse(source)
    inputs = {decl.name: Value(1, input_mb) for decl in ast.inputs}
    uid = engine.deploy(source, initial_inputs=inputs)
    env.run()
    record = engine.completion(uid)
    if record.state is not RunState.COMPLETED:
        raise ConfigError(f"centralized run failed: {record.errors}")
    return record.completed_at, net.ledger


@dataclass
class _DistributedPlan:
    deployments: list[tuple[str, str, str]]          # (host engine, full uid, text)
    input_destinations: dict[str, tuple[str, ...]]   # workflow input -> host engines
    input_tags: dict[str, object]
    output_names: set[str]
    base_uid: str


def _plan_distributed(topology: Topology, initiator: str, graph, input_mb: float,
                      base_uid: str) -> _DistributedPlan:
    from ..dsl import encode

    qos = topology.qos_matrix()
    subs = decompose(graph)
    input_names = {n.name for n in graph.input_nodes()}
    sizes = SizeEstimator(graph, {name: input_mb for name in input_names})
    engines = sorted(topology.engines.values(), key=lambda e: e.id)
    plan = place(subs, engines, qos, sizes)
    composites = compose(graph, subs, plan, sink=initiator, base_uid=base_uid)

    deployments: list[tuple[str, str, str]] = []
    input_destinations: dict[str, set[str]] = {}
    input_tags: dict[str, object] = {}
    for comp in composites:
        deployments.append((comp.host_engine, comp.full_uid, encode(comp).text))
        for inp in comp.inputs:
            if inp.name in input_names:
                input_destinations.setdefault(inp.name, set()).add(comp.host_engine)
                input_tags[inp.name] = inp.tag
    return _DistributedPlan(
        deployments=deployments,
        input_destinations={k: tuple(sorted(v)) for k, v in input_destinations.items()},
        input_tags=input_tags,
        output_names={n.name for n in graph.output_nodes()},
        base_uid=base_uid,
    )


def _simulate_distributed(topology: Topology, initiator: str, dplan: _DistributedPlan,
                          resolver, input_mb: float, tie_seed: int):
    env = EventLoop(tie_seed=tie_seed)
    net = SimNetwork(env, topology)
    engines = _build_engines(env, net, topology, resolver)

    arrivals: dict[str, float] = {}

    def collect(envelope: ValueEnvelope) -> None:
        if envelope.variable in dplan.output_names and \
                envelope.workflow_uid.startswith(dplan.base_uid):
            arrivals[envelope.variable] = env.now()

    engines[initiator].value_listeners.append(collect)

    transport = net.transport_for(initiator)
    for host, uid, text in dplan.deployments:
        endpoint = topology.engines[host].endpoint
        transport.send(endpoint, DeployMessage(text, origin=f"{uid}.orc"),
                       size_mb=len(text.encode()) / 1e6)
    for name, hosts in sorted(dplan.input_destinations.items()):
        for host in hosts:
            endpoint = topology.engines[host].endpoint
            envelope = ValueEnvelope(dplan.base_uid, name, dplan.input_tags[name], input_mb, 1)
            transport.send(endpoint, ValueMessage(envelope), size_mb=input_mb)
    env.run()

    for host, uid, _text in dplan.deployments:
        record = engines[host].completion(uid)
        if record.state is not RunState.COMPLETED:
            raise ConfigError(f"composite {uid} on {host} ended {record.state}: {record.errors}")
    if set(arrivals) != dplan.output_names:
        raise ConfigError(f"sink received {sorted(arrivals)}, expected {sorted(dplan.output_names)}")
    return max(arrivals.values()), net.ledger


def run_experiment(cfg: ExperimentConfig, topology: Topology) -> RunReport:
    """Simulate one (pattern, mode) configuration over all sizes and repetitions.

    Identical (config, topology, seed) triples produce bit-identical
    reports: all randomness is derived from the configured seed.
    """
    _check_topology(cfg, topology)
    source = generate_workflow(cfg.pattern, cfg.service_count)
    resolver = pattern_resolver(cfg.pattern, cfg.service_count)
    engine_id = _engine_for_mode(cfg, topology)

    records: list[RunRecord] = []
    if cfg.mode == "distributed":
        ast = parse(source)
        typed = typecheck(ast, resolve_descriptions(ast, resolver))
        graph = build_graph(typed)
        for input_mb in cfg.input_sizes:
            base_uid = generate_uid(ast.name, seed=_stable_seed(cfg.rng_seed, input_mb))
            dplan = _plan_distributed(topology, engine_id, graph, input_mb, base_uid)
            for rep in range(cfg.repetitions):
                tie = _stable_seed(cfg.rng_seed, cfg.mode, input_mb, rep)
                time_s, ledger = _simulate_distributed(
                    topology, engine_id, dplan, resolver, input_mb, tie
                )
                records.append(RunRecord(cfg.pattern, cfg.service_count, cfg.mode,
                                         input_mb, rep, time_s, ledger.total_mb))
    else:
        uid_source = _with_uid(source, generate_uid(cfg.pattern, seed=_stable_seed(cfg.rng_seed)))
        for input_mb in cfg.input_sizes:
            for rep in range(cfg.repetitions):
                tie = _stable_seed(cfg.rng_seed, cfg.mode, input_mb, rep)
                time_s, ledger = _simulate_centralized(
                    topology, engine_id, uid_source, resolver, input_mb, tie
                )
                records.append(RunRecord(cfg.pattern, cfg.service_count, cfg.mode,
                                         input_mb, rep, time_s, ledger.total_mb))
    log.info("experiment %s/%s/%s: %d runs", cfg.pattern, cfg.service_count, cfg.mode, len(records))
    return compute_report(records)


def run_modes(pattern: str, service_count: int, modes: list[str], topology: Topology,
              input_sizes: tuple[float, ...] = DEFAULT_INPUT_SIZES,
              repetitions: int = DEFAULT_REPETITIONS, rng_seed: int = 0,
              central_engine: Optional[str] = None,
              initiator_engine: Optional[str] = None) -> RunReport:
    """Run several modes of one workflow and aggregate speedups."""
    records: list[RunRecord] = []
    for mode in modes:
        cfg = ExperimentConfig(
            pattern=pattern, service_count=service_count, mode=mode,
            input_sizes=input_sizes, repetitions=repetitions, rng_seed=rng_seed,
            central_engine=central_engine, initiator_engine=initiator_engine,
        )
        records.extend(run_experiment(cfg, topology).runs)
    return compute_report(records)
