"""Network QoS measurement and the placement mathematics.

Latency/bandwidth samples, transmission-time prediction, k-means
clustering of candidate engines, elimination of dominated clusters,
ranking, and the speedup metric used by the experiment harness.

Units are seconds and MB/s throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol

from .errors import DomainError, MissingQosError, ProbeError

MIN_BANDWIDTH_MBPS = 0.01


@dataclass(frozen=True)
class QosSample:
    """Latency (seconds) and bandwidth (MB/s) of one engine-service link."""

    latency: float
    bandwidth: float

    def __post_init__(self):
        if self.latency < 0:
            raise DomainError(f"latency must be >= 0, got {self.latency}")
        if self.bandwidth <= 0:
            raise DomainError(f"bandwidth must be > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class EngineInfo:
    id: str
    endpoint: str
    region: str = ""


class QosMatrix:
    """Immutable snapshot of (engine, service) link samples."""

    def __init__(self, samples: dict[tuple[str, str], QosSample], timestamp: float = 0.0):
        self._samples = dict(samples)
        self.timestamp = timestamp

    def sample(self, engine_id: str, service_id: str) -> QosSample:
        try:
            return self._samples[(engine_id, service_id)]
        except KeyError:
            raise MissingQosError(engine_id, service_id) from None

    def has(self, engine_id: str, service_id: str) -> bool:
        return (engine_id, service_id) in self._samples

    def items(self) -> list[tuple[tuple[str, str], QosSample]]:
        return sorted(self._samples.items())

    def to_json(self) -> str:
        rows = [
            {"engine": e, "service": s, "latency_s": q.latency, "bandwidth_mbps": q.bandwidth}
            for (e, s), q in self.items()
        ]
        return json.dumps(rows, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "QosMatrix":
        rows = json.loads(text)
        samples = {
            (r["engine"], r["service"]): QosSample(r["latency_s"], r["bandwidth_mbps"])
            for r in rows
        }
        return cls(samples)


@dataclass(frozen=True)
class TransmissionEstimate:
    """Predicted time to move ``size_mb`` of input over one link."""

    engine_id: str
    seconds: float
    latency: float
    bandwidth: float
    size_mb: float


def estimate_transmission(latency: float, bandwidth: float, size_mb: float) -> float:
    """Predicted transfer time: latency plus size over bandwidth."""
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be > 0, got {bandwidth}")
    if latency < 0 or size_mb < 0:
        raise DomainError("latency and size must be >= 0")
    return latency + size_mb / bandwidth


def speedup(centralized_seconds: float, distributed_seconds: float) -> float:
    """Ratio of centralized to distributed completion time."""
    if distributed_seconds <= 0:
        raise DomainError(f"distributed time must be > 0, got {distributed_seconds}")
    return centralized_seconds / distributed_seconds


# --- clustering ---

@dataclass(frozen=True)
class Cluster:
    """A group of engines with its centroid in raw (latency, bandwidth) space."""

    members: frozenset[str]
    centroid: tuple[float, float]


def _zscore(features: dict[str, QosSample]) -> dict[str, tuple[float, float]]:
    lats = [q.latency for q in features.values()]
    bws = [q.bandwidth for q in features.values()]
    n = len(lats)
    mean_l, mean_b = sum(lats) / n, sum(bws) / n
    std_l = math.sqrt(sum((x - mean_l) ** 2 for x in lats) / n)
    std_b = math.sqrt(sum((x - mean_b) ** 2 for x in bws) / n)
    return {
        e: (
            (q.latency - mean_l) / std_l if std_l > 0 else 0.0,
            (q.bandwidth - mean_b) / std_b if std_b > 0 else 0.0,
        )
        for e, q in features.items()
    }


def _dist2(a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def cluster_engines(
    features: dict[str, QosSample],
    k: int,
    size_mb: float = 1.0,
    max_iterations: int = 100,
    trace: Optional[list[float]] = None,
) -> list[Cluster]:
    """Group engines by k-means over z-score-normalized (latency, bandwidth).

    Seeding is deterministic: the first seed is the engine with the
    smallest predicted transmission time for ``size_mb``, subsequent
    seeds are farthest-point picks; ties fall back to engine id. Runs
    until the assignment reaches a fixed point or ``max_iterations``.
    Empty clusters are dropped, so fewer than ``k`` clusters may return.
    When given, ``trace`` collects the within-cluster sum of squares
    after each iteration.
    """
    if not features:
        raise DomainError("at least one engine feature is required")
    k = max(1, min(k, len(features)))
    points = _zscore(features)
    ids = sorted(points)

    first = min(
        ids,
        key=lambda e: (estimate_transmission(features[e].latency, features[e].bandwidth, size_mb), e),
    )
    seeds = [first]
    while len(seeds) < k:
        best = min(
            (e for e in ids if e not in seeds),
            key=lambda e: (-min(_dist2(points[e], points[s]) for s in seeds), e),
        )
        seeds.append(best)
    centroids = [points[s] for s in seeds]

    assignment: dict[str, int] = {}
    for _ in range(max_iterations):
        new_assignment = {
            e: min(range(len(centroids)), key=lambda ci: (_dist2(points[e], centroids[ci]), ci))
            for e in ids
        }
        if new_assignment == assignment:
            break
        assignment = new_assignment
        for ci in range(len(centroids)):
            members = [e for e in ids if assignment[e] == ci]
            if members:
                centroids[ci] = (
                    sum(points[e][0] for e in members) / len(members),
                    sum(points[e][1] for e in members) / len(members),
                )
        if trace is not None:
            trace.append(
                sum(_dist2(points[e], centroids[assignment[e]]) for e in ids)
            )

    clusters = []
    for ci in range(len(centroids)):
        members = [e for e in ids if assignment[e] == ci]
        if not members:
            continue
        raw = (
            sum(features[e].latency for e in members) / len(members),
            sum(features[e].bandwidth for e in members) / len(members),
        )
        clusters.append(Cluster(members=frozenset(members), centroid=raw))
    return clusters


def within_cluster_ss(features: dict[str, QosSample], clusters: Iterable[Cluster]) -> float:
    """Within-cluster sum of squares in normalized feature space."""
    points = _zscore(features)
    total = 0.0
    for c in clusters:
        members = sorted(c.members)
        cx = sum(points[e][0] for e in members) / len(members)
        cy = sum(points[e][1] for e in members) / len(members)
        total += sum(_dist2(points[e], (cx, cy)) for e in members)
    return total


def eliminate_clusters(clusters: list[Cluster]) -> list[Cluster]:
    """Drop clusters whose centroid is Pareto-dominated.

    A cluster goes when another cluster's centroid has strictly lower
    latency and strictly higher bandwidth. At least one cluster always
    survives.
    """
    if not clusters:
        raise DomainError("at least one cluster is required")
    survivors = []
    for c in clusters:
        dominated = any(
            other.centroid[0] < c.centroid[0] and other.centroid[1] > c.centroid[1]
            for other in clusters
            if other is not c
        )
        if not dominated:
            survivors.append(c)
    assert survivors
    return survivors


def rank_and_select(
    survivors: Iterable[str],
    service_id: str,
    qos: QosMatrix,
    size_mb: float,
) -> TransmissionEstimate:
    """Pick the engine with the smallest predicted transmission time.

    Ties are broken by engine id.
    """
    estimates = rank_engines(survivors, service_id, qos, size_mb)
    if not estimates:
        raise DomainError("no surviving engines to rank")
    return estimates[0]


def rank_engines(
    engines: Iterable[str],
    service_id: str,
    qos: QosMatrix,
    size_mb: float,
) -> list[TransmissionEstimate]:
    """All engines' transmission estimates, best first (ties by id)."""
    out = []
    for e in engines:
        q = qos.sample(e, service_id)
        out.append(
            TransmissionEstimate(
                engine_id=e,
                seconds=estimate_transmission(q.latency, q.bandwidth, size_mb),
                latency=q.latency,
                bandwidth=q.bandwidth,
                size_mb=size_mb,
            )
        )
    out.sort(key=lambda t: (t.seconds, t.engine_id))
    return out


# --- probing ---

class ProbeChannel(Protocol):
    """Transport-level probe against one service endpoint."""

    def head(self, service_id: str) -> float:
        """Round-trip time in seconds of one metadata-only request."""
        ...

    def fetch(self, service_id: str) -> tuple[float, float]:
        """(completion time in seconds, response size in MB) of one retrieval."""
        ...


def probe_latency(probe: ProbeChannel, service_id: str, n: int = 5) -> float:
    """Mean round-trip time over ``n`` metadata requests."""
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    samples = [probe.head(service_id) for _ in range(n)]
    return sum(samples) / n


def probe_bandwidth(
    probe: ProbeChannel,
    service_id: str,
    floor_mbps: float = MIN_BANDWIDTH_MBPS,
) -> float:
    """Estimate bandwidth from one retrieval's completion time and size.

    The measured latency is subtracted from the completion time before
    dividing; the result is floored at ``floor_mbps``.
    """
    latency = probe.head(service_id)
    completion, size_mb = probe.fetch(service_id)
    if size_mb <= 0:
        raise ProbeError(f"service {service_id!r} returned an empty response")
    net = completion - latency
    if net <= 0:
        return floor_mbps
    return max(size_mb / net, floor_mbps)
