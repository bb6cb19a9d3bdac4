"""Multi-region topologies and the network model that prices their links.

The default link classes (editable configuration, not ground truth):
intra-region 5 ms / 100 MB/s, inter-region within a continent 40 ms /
25 MB/s, trans-continental 120 ms / 8 MB/s. The optional pair jitter
spreads those figures deterministically per endpoint pair, standing in
for arbitrary host placement inside regions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from ..engine.services import combine_operation
from ..engine.values import Value
from ..errors import ConfigError, UnknownRegionError
from ..qos import EngineInfo, QosMatrix, QosSample

INTRA_REGION = QosSample(0.005, 100.0)
INTER_REGION_CONTINENT = QosSample(0.040, 25.0)
TRANS_CONTINENT = QosSample(0.120, 8.0)

DEFAULT_PROCESSING_DELAY_S = 0.05


@dataclass(frozen=True)
class Region:
    name: str

    @property
    def continent(self) -> str:
        return self.name.split("-", 1)[0]


@dataclass(frozen=True)
class PairJitter:
    """Deterministic per-pair multiplicative spread on latency and bandwidth."""

    latency_spread: float = 0.4
    bandwidth_spread: float = 0.4
    seed: int = 0

    def multipliers(self, key_a: str, key_b: str) -> tuple[float, float]:
        lo, hi = sorted((key_a, key_b))
        digest = hashlib.md5(f"{self.seed}:{lo}:{hi}".encode()).digest()
        u1 = int.from_bytes(digest[:8], "big") / 2**64
        u2 = int.from_bytes(digest[8:16], "big") / 2**64
        return (
            1.0 + self.latency_spread * (2.0 * u1 - 1.0),
            1.0 + self.bandwidth_spread * (2.0 * u2 - 1.0),
        )

    def to_json_dict(self) -> dict:
        return {
            "kind": "pair_jitter",
            "latency_spread": self.latency_spread,
            "bandwidth_spread": self.bandwidth_spread,
            "seed": self.seed,
        }


class NetworkModel:
    """Region-pair QoS lookup with optional per-pair jitter."""

    def __init__(self, pair_qos: dict[tuple[str, str], QosSample],
                 noise: Optional[PairJitter] = None):
        self.pair_qos = dict(pair_qos)
        self.noise = noise

    @classmethod
    def default_for(cls, regions: Iterable[str], noise: Optional[PairJitter] = None) -> "NetworkModel":
        names = list(regions)
        pair_qos: dict[tuple[str, str], QosSample] = {}
        for a in names:
            for b in names:
                if a == b:
                    pair_qos[(a, b)] = INTRA_REGION
                elif Region(a).continent == Region(b).continent:
                    pair_qos[(a, b)] = INTER_REGION_CONTINENT
                else:
                    pair_qos[(a, b)] = TRANS_CONTINENT
        return cls(pair_qos, noise)

    def base_sample(self, region_a: str, region_b: str) -> QosSample:
        if (region_a, region_b) in self.pair_qos:
            return self.pair_qos[(region_a, region_b)]
        if (region_b, region_a) in self.pair_qos:
            return self.pair_qos[(region_b, region_a)]
        raise UnknownRegionError(f"no QoS entry for region pair ({region_a}, {region_b})")

    def sample(self, region_a: str, region_b: str,
               key_a: Optional[str] = None, key_b: Optional[str] = None) -> QosSample:
        base = self.base_sample(region_a, region_b)
        if self.noise is None or key_a is None or key_b is None or key_a == key_b:
            return base
        mul_lat, mul_bw = self.noise.multipliers(key_a, key_b)
        return QosSample(base.latency * mul_lat, base.bandwidth * mul_bw)


@dataclass(frozen=True)
class OutputSize:
    """How a service's response size relates to its request size (MB)."""

    kind: str = "identity"       # identity | scale | fixed
    value: float = 1.0

    def apply(self, input_mb: float) -> float:
        if self.kind == "identity":
            return input_mb
        if self.kind == "scale":
            return input_mb * self.value
        if self.kind == "fixed":
            return self.value
        raise ConfigError(f"unknown output size kind {self.kind!r}")


@dataclass
class SimulatedService:
    id: str
    region: str
    delay_s: float = DEFAULT_PROCESSING_DELAY_S
    output_size: OutputSize = field(default_factory=OutputSize)
    payload_fn: Callable[[str, dict[str, Value]], Value] = combine_operation

    def invoke(self, operation: str, args: dict[str, Value]) -> Value:
        result = self.payload_fn(operation, args)
        input_mb = sum(v.size_mb for v in args.values())
        return Value(result.payload, self.output_size.apply(input_mb))


class Topology:
    """Engines and services placed in regions, plus the link model."""

    def __init__(self, regions: Iterable[Region], engines: Iterable[EngineInfo],
                 services: Iterable[SimulatedService], model: NetworkModel):
        self.regions = {r.name: r for r in regions}
        self.engines = {e.id: e for e in engines}
        self.services = {s.id: s for s in services}
        self.model = model
        for e in self.engines.values():
            if e.region not in self.regions:
                raise UnknownRegionError(f"engine {e.id!r} placed in undeclared region {e.region!r}")
        for s in self.services.values():
            if s.region not in self.regions:
                raise UnknownRegionError(f"service {s.id!r} placed in undeclared region {s.region!r}")

    def engine_service_qos(self, engine_id: str, service_id: str) -> QosSample:
        engine = self.engines[engine_id]
        service = self.services[service_id]
        return self.model.sample(engine.region, service.region, engine.id, service.id)

    def engine_engine_qos(self, a: str, b: str) -> QosSample:
        ea, eb = self.engines[a], self.engines[b]
        return self.model.sample(ea.region, eb.region, ea.id, eb.id)

    def qos_matrix(self) -> QosMatrix:
        samples = {
            (e, s): self.engine_service_qos(e, s)
            for e in sorted(self.engines)
            for s in sorted(self.services)
        }
        return QosMatrix(samples, timestamp=0.0)

    def engine_by_endpoint(self, endpoint: str) -> Optional[EngineInfo]:
        return next((e for e in self.engines.values() if e.endpoint == endpoint), None)

    # --- config file round trip ---

    def to_json_dict(self) -> dict:
        pairs = sorted(self.model.pair_qos.items())
        return {
            "regions": sorted(self.regions),
            "engines": [
                {"id": e.id, "endpoint": e.endpoint, "region": e.region}
                for e in sorted(self.engines.values(), key=lambda e: e.id)
            ],
            "services": [
                {
                    "id": s.id,
                    "region": s.region,
                    "delay_s": s.delay_s,
                    "output_size": {"kind": s.output_size.kind, "value": s.output_size.value},
                }
                for s in sorted(self.services.values(), key=lambda s: s.id)
            ],
            "pair_qos": [
                {"a": a, "b": b, "latency_s": q.latency, "bandwidth_mbps": q.bandwidth}
                for (a, b), q in pairs
            ],
            "noise": self.model.noise.to_json_dict() if self.model.noise else None,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Topology":
        try:
            regions = [Region(name) for name in data["regions"]]
            engines = [EngineInfo(e["id"], e["endpoint"], e["region"]) for e in data["engines"]]
            services = [
                SimulatedService(
                    id=s["id"],
                    region=s["region"],
                    delay_s=float(s.get("delay_s", DEFAULT_PROCESSING_DELAY_S)),
                    output_size=OutputSize(
                        kind=s.get("output_size", {}).get("kind", "identity"),
                        value=float(s.get("output_size", {}).get("value", 1.0)),
                    ),
                )
                for s in data["services"]
            ]
            pair_qos = {
                (p["a"], p["b"]): QosSample(p["latency_s"], p["bandwidth_mbps"])
                for p in data["pair_qos"]
            }
            noise = None
            if data.get("noise"):
                n = data["noise"]
                if n.get("kind") != "pair_jitter":
                    raise ConfigError(f"unknown noise kind {n.get('kind')!r}")
                noise = PairJitter(
                    latency_spread=float(n.get("latency_spread", 0.4)),
                    bandwidth_spread=float(n.get("bandwidth_spread", 0.4)),
                    seed=int(n.get("seed", 0)),
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed topology config: {exc}") from exc
        return cls(regions, engines, services, NetworkModel(pair_qos, noise))

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_json_dict(json.loads(text))


def build_topology(regions: Iterable[Region], engines: Iterable[EngineInfo],
                   services: Iterable[SimulatedService], model: NetworkModel) -> Topology:
    """Validate placements and assemble a topology."""
    return Topology(regions, engines, services, model)


# --- the two experiment families ---

def continental_topology(service_count: int, local_engines: int = 4,
                         noise: Optional[PairJitter] = None,
                         service_region: str = "us-east-1",
                         remote_region: str = "us-west-1") -> Topology:
    """All services in one region; engines there plus one remote engine."""
    if noise is None:
        noise = PairJitter(seed=7)
    regions = [Region(service_region), Region(remote_region)]
    engines = [
        EngineInfo(f"eng-local-{i}", f"http://engines.test/local-{i}", service_region)
        for i in range(1, local_engines + 1)
    ]
    engines.append(EngineInfo("eng-remote-1", "http://engines.test/remote-1", remote_region))
    services = [
        SimulatedService(id=f"Service{i}", region=service_region)
        for i in range(1, service_count + 1)
    ]
    model = NetworkModel.default_for([r.name for r in regions], noise)
    return build_topology(regions, engines, services, model)


def intercontinental_topology(service_count: int,
                              noise: Optional[PairJitter] = None) -> Topology:
    """Services spread in blocks across four regions, one engine per region."""
    if noise is None:
        noise = PairJitter(seed=7)
    names = ["us-east-1", "us-west-1", "us-west-2", "eu-west-1"]
    regions = [Region(n) for n in names]
    engines = [
        EngineInfo(f"eng-{name}", f"http://engines.test/{name}", name) for name in names
    ]
    block = max(1, -(-service_count // len(names)))  # ceil division
    services = []
    for i in range(1, service_count + 1):
        region = names[min((i - 1) // block, len(names) - 1)]
        services.append(SimulatedService(id=f"Service{i}", region=region))
    model = NetworkModel.default_for(names, noise)
    return build_topology(regions, engines, services, model)
