"""Inter-engine message transport.

The wire protocol has three payloads: DEPLOY (workflow source text),
VALUE (a dataflow envelope), and ACK (a delivery acknowledgment);
deliveries are acknowledged by the receiving engine or rejected with
its error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Union

from ..errors import TransportError
from ..sim import EventLoop
from .values import ValueEnvelope, envelope_from_wire, envelope_to_wire


@dataclass(frozen=True)
class DeployMessage:
    spec_text: str
    origin: str = "<deployed>"


@dataclass(frozen=True)
class ValueMessage:
    envelope: ValueEnvelope


@dataclass(frozen=True)
class AckMessage:
    message_id: str
    status: str = "ok"


Message = Union[DeployMessage, ValueMessage, AckMessage]


def message_to_wire(message: Message) -> str:
    """Serialize any protocol message to its JSON wire form."""
    if isinstance(message, DeployMessage):
        body = {"kind": "DEPLOY", "spec_text": message.spec_text, "origin": message.origin}
    elif isinstance(message, ValueMessage):
        body = {"kind": "VALUE", "envelope": json.loads(envelope_to_wire(message.envelope))}
    elif isinstance(message, AckMessage):
        body = {"kind": "ACK", "id": message.message_id, "status": message.status}
    else:
        raise TransportError(f"unknown message {message!r}")
    return json.dumps(body, sort_keys=True)


def message_from_wire(text: str) -> Message:
    try:
        data = json.loads(text)
        kind = data["kind"]
        if kind == "DEPLOY":
            return DeployMessage(data["spec_text"], data.get("origin", "<deployed>"))
        if kind == "VALUE":
            return ValueMessage(envelope_from_wire(json.dumps(data["envelope"])))
        if kind == "ACK":
            return AckMessage(data["id"], data.get("status", "ok"))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise TransportError(f"malformed message: {exc}") from exc
    raise TransportError(f"unknown message kind {kind!r}")


@dataclass
class DispatchReceipt:
    destination: str
    size_mb: float
    sent_at: float
    delivered_at: Optional[float] = None
    status: str = "pending"  # pending | delivered | rejected | failed
    error: Optional[Exception] = None

    @property
    def transfer_seconds(self) -> Optional[float]:
        if self.delivered_at is None:
            return None
        return self.delivered_at - self.sent_at


class Transport(Protocol):
    """Sender-bound message channel to peer engines."""

    def send(
        self,
        dest_endpoint: str,
        message: Message,
        size_mb: float,
        on_delivered: Optional[Callable[[DispatchReceipt], None]] = None,
        on_rejected: Optional[Callable[[Exception], None]] = None,
    ) -> DispatchReceipt: ...


class InMemoryNetwork:
    """Zero-delay in-process network, the unit-test and local-run transport.

    Endpoints map to message handlers (engines). An optional cost
    function turns (src, dest, size) into a delivery delay in seconds.
    """

    def __init__(self, env: EventLoop,
                 cost: Optional[Callable[[str, str, float], float]] = None):
        self.env = env
        self.cost = cost
        self._handlers: dict[str, Callable[[Message], None]] = {}

    def register(self, endpoint: str, handler: Callable[[Message], None]) -> None:
        self._handlers[endpoint] = handler

    def bind(self, src_endpoint: str) -> "BoundTransport":
        return BoundTransport(self, src_endpoint)

    def deliver(self, src: str, dest: str, message: Message, size_mb: float,
                on_delivered, on_rejected) -> DispatchReceipt:
        if dest not in self._handlers:
            raise TransportError(f"unknown engine endpoint {dest!r}")
        receipt = DispatchReceipt(destination=dest, size_mb=size_mb, sent_at=self.env.now())
        delay = 0.0
        if src != dest and self.cost is not None:
            delay = self.cost(src, dest, size_mb)

        def arrive():
            receipt.delivered_at = self.env.now()
            try:
                self._handlers[dest](message)
            except Exception as exc:
                receipt.status = "rejected"
                receipt.error = exc
                if on_rejected is not None:
                    on_rejected(exc)
                return
            receipt.status = "delivered"
            if on_delivered is not None:
                on_delivered(receipt)

        self.env.schedule(delay, arrive)
        return receipt


@dataclass
class BoundTransport:
    network: InMemoryNetwork
    src_endpoint: str

    def send(self, dest_endpoint, message, size_mb, on_delivered=None, on_rejected=None):
        return self.network.deliver(
            self.src_endpoint, dest_endpoint, message, size_mb, on_delivered, on_rejected
        )
