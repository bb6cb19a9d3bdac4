"""Simulated transport and service invocation over a topology.

Timing conventions, applied uniformly:

- one engine-to-engine message of size S over a link (L, B) is delivered
  L + S/B after its bandwidth slot starts;
- a service invocation round trip costs L + S_in/B for the request, the
  service's processing delay, then S_out/B for the response (the
  round-trip latency is charged once, on the request);
- the bandwidth portion of every transfer occupies the engine's network
  interface, so concurrent transfers at one engine serialize there while
  latency and remote processing overlap freely. This is what makes a
  single central engine a throughput bottleneck.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..engine.transport import DeployMessage, DispatchReceipt, Message
from ..engine.values import Value
from ..errors import InvocationError, ProbeError, TransportError
from ..qos import QosSample
from ..sim import EventLoop
from .topology import Topology

PROBE_PAYLOAD_MB = 1.0


@dataclass
class Transfer:
    kind: str          # request | response | forward | deploy
    src: str
    dst: str
    size_mb: float
    cross_region: bool


@dataclass
class TransferLedger:
    transfers: list[Transfer] = field(default_factory=list)

    def record(self, kind: str, src: str, dst: str, size_mb: float, cross_region: bool) -> None:
        self.transfers.append(Transfer(kind, src, dst, size_mb, cross_region))

    @property
    def total_mb(self) -> float:
        return sum(t.size_mb for t in self.transfers)

    @property
    def cross_region_mb(self) -> float:
        return sum(t.size_mb for t in self.transfers if t.cross_region)


class SimNetwork:
    """Message fabric with per-engine interface queues and byte accounting."""

    def __init__(self, env: EventLoop, topology: Topology):
        self.env = env
        self.topology = topology
        self.ledger = TransferLedger()
        self._handlers: dict[str, Callable[[Message], None]] = {}
        self._nic_free: dict[str, float] = {e: 0.0 for e in topology.engines}

    def register(self, engine_id: str, handler: Callable[[Message], None]) -> None:
        self._handlers[self.topology.engines[engine_id].endpoint] = handler

    def _book_nic(self, engine_id: str, duration: float) -> float:
        """Reserve the engine's interface; returns the slot start time."""
        start = max(self.env.now(), self._nic_free[engine_id])
        self._nic_free[engine_id] = start + duration
        return start

    # --- engine-to-engine messages ---

    def transport_for(self, engine_id: str) -> "SimTransport":
        return SimTransport(self, engine_id)

    def send(self, src_engine: str, dest_endpoint: str, message: Message, size_mb: float,
             on_delivered, on_rejected) -> DispatchReceipt:
        dest = self.topology.engine_by_endpoint(dest_endpoint)
        if dest is None or dest.endpoint not in self._handlers:
            raise TransportError(f"unknown engine endpoint {dest_endpoint!r}")
        receipt = DispatchReceipt(destination=dest_endpoint, size_mb=size_mb, sent_at=self.env.now())

        def deliver():
            receipt.delivered_at = self.env.now()
            try:
                self._handlers[dest_endpoint](message)
            except Exception as exc:
                receipt.status = "rejected"
                receipt.error = exc
                if on_rejected is not None:
                    on_rejected(exc)
                return
            receipt.status = "delivered"
            if on_delivered is not None:
                on_delivered(receipt)

        if dest.id == src_engine:
            self.env.schedule(0.0, deliver)
            return receipt

        qos = self.topology.engine_engine_qos(src_engine, dest.id)
        kind = "deploy" if isinstance(message, DeployMessage) else "forward"
        src_region = self.topology.engines[src_engine].region
        self.ledger.record(kind, src_engine, dest.id, size_mb, src_region != dest.region)

        tx_start = self._book_nic(src_engine, size_mb / qos.bandwidth)
        arrival_head = tx_start + qos.latency

        def begin_receive():
            rx_start = self._book_nic(dest.id, size_mb / qos.bandwidth)
            self.env.at(rx_start + size_mb / qos.bandwidth, deliver)

        self.env.at(arrival_head, begin_receive)
        return receipt

    # --- engine-to-service invocations ---

    def port_for(self, engine_id: str, service_name: str, port_name: str) -> "SimServicePort":
        if service_name not in self.topology.services:
            raise InvocationError(f"no service {service_name!r} in the topology")
        return SimServicePort(self, engine_id, service_name)

    def invoke(self, engine_id: str, service_id: str, operation: str,
               args: dict[str, Value], done, fail) -> None:
        service = self.topology.services[service_id]
        qos = self.topology.engine_service_qos(engine_id, service_id)
        engine_region = self.topology.engines[engine_id].region
        cross = engine_region != service.region
        size_in = sum(v.size_mb for v in args.values())
        self.ledger.record("request", engine_id, service_id, size_in, cross)

        tx_start = self._book_nic(engine_id, size_in / qos.bandwidth)
        arrive = tx_start + qos.latency + size_in / qos.bandwidth

        def process():
            try:
                result = service.invoke(operation, args)
            except Exception as exc:
                fail(InvocationError(f"operation {operation!r} failed: {exc}"))
                return
            self.ledger.record("response", service_id, engine_id, result.size_mb, cross)

            def receive_response():
                rx_start = self._book_nic(engine_id, result.size_mb / qos.bandwidth)
                self.env.at(rx_start + result.size_mb / qos.bandwidth, lambda: done(result))

            self.env.schedule(service.delay_s, receive_response)

        self.env.at(arrive, process)

    # --- probing ---

    def probe_channel(self, engine_id: str, payload_mb: float = PROBE_PAYLOAD_MB) -> "SimProbeChannel":
        return SimProbeChannel(self, engine_id, payload_mb)


@dataclass
class SimTransport:
    network: SimNetwork
    engine_id: str

    def send(self, dest_endpoint, message, size_mb, on_delivered=None, on_rejected=None):
        return self.network.send(
            self.engine_id, dest_endpoint, message, size_mb, on_delivered, on_rejected
        )


@dataclass
class SimServicePort:
    network: SimNetwork
    engine_id: str
    service_id: str

    def request(self, operation, args, done, fail) -> None:
        self.network.invoke(self.engine_id, self.service_id, operation, args, done, fail)


@dataclass
class SimDirectory:
    """Service directory backed by the simulated network."""

    network: SimNetwork
    engine_id: str

    def port_for(self, service_name: str, port_name: str):
        return self.network.port_for(self.engine_id, service_name, port_name)


@dataclass
class SimProbeChannel:
    """Measurements against the simulated fabric; noise-free by construction."""

    network: SimNetwork
    engine_id: str
    payload_mb: float = PROBE_PAYLOAD_MB

    def _qos(self, service_id: str) -> QosSample:
        if service_id not in self.network.topology.services:
            raise ProbeError(f"unreachable service {service_id!r}")
        return self.network.topology.engine_service_qos(self.engine_id, service_id)

    def head(self, service_id: str) -> float:
        return self._qos(service_id).latency

    def fetch(self, service_id: str) -> tuple[float, float]:
        qos = self._qos(service_id)
        return qos.latency + self.payload_mb / qos.bandwidth, self.payload_mb
