"""Dataflow values and the inter-engine envelope wire format."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

from ..dsl.ast import TypeTag
from ..errors import TransportError


@dataclass(frozen=True)
class Value:
    """An opaque payload with its declared size in MB.

    The declared size drives transfer-cost accounting and may exceed the
    encoded size to emulate large data.
    """

    payload: object
    size_mb: float


@dataclass(frozen=True)
class ValueEnvelope:
    """A named dataflow value addressed by (workflow uid, variable)."""

    workflow_uid: str
    variable: str
    tag: TypeTag
    size_mb: float
    payload: object

    def value(self) -> Value:
        return Value(self.payload, self.size_mb)


def _encode_payload(tag: TypeTag, payload: object) -> bytes:
    if tag is TypeTag.INT:
        return str(int(payload)).encode("ascii")
    if tag is TypeTag.STRING:
        return str(payload).encode("utf-8")
    return json.dumps(payload, sort_keys=True).encode("utf-8")


def _decode_payload(tag: TypeTag, raw: bytes) -> object:
    if tag is TypeTag.INT:
        return int(raw.decode("ascii"))
    if tag is TypeTag.STRING:
        return raw.decode("utf-8")
    return json.loads(raw.decode("utf-8"))


def envelope_to_wire(env: ValueEnvelope) -> str:
    """Serialize to the JSON wire form {uid, variable, type, size_mb, payload_b64}."""
    return json.dumps(
        {
            "uid": env.workflow_uid,
            "variable": env.variable,
            "type": env.tag.value,
            "size_mb": env.size_mb,
            "payload_b64": base64.b64encode(_encode_payload(env.tag, env.payload)).decode("ascii"),
        },
        sort_keys=True,
    )


def envelope_from_wire(text: str) -> ValueEnvelope:
    try:
        data = json.loads(text)
        tag = TypeTag(data["type"])
        payload = _decode_payload(tag, base64.b64decode(data["payload_b64"]))
        return ValueEnvelope(
            workflow_uid=data["uid"],
            variable=data["variable"],
            tag=tag,
            size_mb=float(data["size_mb"]),
            payload=payload,
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise TransportError(f"malformed value envelope: {exc}") from exc
