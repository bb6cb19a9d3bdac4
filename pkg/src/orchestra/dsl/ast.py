"""Abstract syntax for workflow specifications."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union


class TypeTag(Enum):
    INT = "int"
    STRING = "string"
    ANY = "any"


def unify(a: TypeTag, b: TypeTag) -> Optional[TypeTag]:
    """Unify two type tags; ANY unifies with everything. None if incompatible."""
    if a is b:
        return a
    if a is TypeTag.ANY:
        return b
    if b is TypeTag.ANY:
        return a
    return None


@dataclass(frozen=True)
class Pos:
    line: int
    column: int


@dataclass(frozen=True)
class EngineDecl:
    id: str
    url: str
    pos: Pos


@dataclass(frozen=True)
class DescriptionDecl:
    id: str
    url: str
    pos: Pos


@dataclass(frozen=True)
class ServiceDecl:
    id: str
    description_id: str
    service_name: str
    pos: Pos


@dataclass(frozen=True)
class PortDecl:
    id: str
    service_id: str
    port_name: str
    pos: Pos


@dataclass(frozen=True)
class VarDecl:
    name: str
    tag: TypeTag
    pos: Pos


@dataclass(frozen=True)
class VarRef:
    """A variable endpoint in a flow statement."""

    name: str
    pos: Pos


@dataclass(frozen=True)
class InvocationRef:
    """A ``port.Op`` endpoint, optionally with a ``.par`` parameter suffix."""

    port_id: str
    operation: str
    param: Optional[str]
    pos: Pos


FlowEndpoint = Union[VarRef, InvocationRef]


@dataclass(frozen=True)
class FlowStmt:
    source: FlowEndpoint
    targets: tuple[FlowEndpoint, ...]
    pos: Pos


@dataclass(frozen=True)
class ForwardStmt:
    variable: str
    engine_id: str
    pos: Pos


@dataclass(frozen=True)
class WorkflowAst:
    name: str
    uid: Optional[str]
    engine_decls: tuple[EngineDecl, ...]
    description_decls: tuple[DescriptionDecl, ...]
    service_decls: tuple[ServiceDecl, ...]
    port_decls: tuple[PortDecl, ...]
    inputs: tuple[VarDecl, ...]
    outputs: tuple[VarDecl, ...]
    flow_stmts: tuple[FlowStmt, ...]
    forward_stmts: tuple[ForwardStmt, ...]
    origin: str = "<source>"

    def engine(self, engine_id: str) -> Optional[EngineDecl]:
        return next((e for e in self.engine_decls if e.id == engine_id), None)

    def service(self, service_id: str) -> Optional[ServiceDecl]:
        return next((s for s in self.service_decls if s.id == service_id), None)

    def port(self, port_id: str) -> Optional[PortDecl]:
        return next((p for p in self.port_decls if p.id == port_id), None)
