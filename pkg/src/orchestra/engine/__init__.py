"""Peer workflow engine runtime: deployment, dataflow execution, forwarding."""

from .runtime import (
    Ack,
    CompletionRecord,
    DeployedWorkflow,
    Engine,
    ForwardRecord,
    InvocationTrace,
    RunState,
)
from .services import LocalDirectory, LocalPort, ServiceDirectory, ServicePort, combine_operation
from .transport import (
    AckMessage,
    BoundTransport,
    DeployMessage,
    DispatchReceipt,
    InMemoryNetwork,
    Message,
    Transport,
    ValueMessage,
    message_from_wire,
    message_to_wire,
)
from .values import Value, ValueEnvelope, envelope_from_wire, envelope_to_wire

__all__ = [
    "Ack",
    "AckMessage",
    "BoundTransport",
    "CompletionRecord",
    "DeployMessage",
    "DeployedWorkflow",
    "DispatchReceipt",
    "Engine",
    "ForwardRecord",
    "InMemoryNetwork",
    "InvocationTrace",
    "LocalDirectory",
    "LocalPort",
    "Message",
    "RunState",
    "ServiceDirectory",
    "ServicePort",
    "Transport",
    "Value",
    "ValueEnvelope",
    "ValueMessage",
    "combine_operation",
    "envelope_from_wire",
    "envelope_to_wire",
    "message_from_wire",
    "message_to_wire",
]
