"""Semantic analysis of a parsed workflow against its service descriptions.

Checks every invocation's argument count and types against the declared
operation signatures, binds variables, and lowers flow statements into
producer/consumer value bindings ready for graph construction.

A ``port.Op`` mention is resolved to an *occurrence*: a target mention
binds one parameter of the most recent occurrence that still has that
parameter open, or starts a new occurrence; a source mention refers to
the most recent occurrence (creating one if none exists). Repeated
mentions of the same invocation output therefore refer to one node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..errors import (
    ArityError,
    DuplicateBindingError,
    ResolveError,
    TypeCheckError,
    UnboundOutputError,
)
from .ast import (
    FlowEndpoint,
    InvocationRef,
    Pos,
    PortDecl,
    ServiceDecl,
    TypeTag,
    VarRef,
    WorkflowAst,
    unify,
)
from .descriptions import OperationSig, ServiceDescriptionDoc

# a value producer: a workflow input or an invocation occurrence
InputRef = tuple[str, str]       # ("input", name)
InvRef = tuple[str, int]         # ("inv", occurrence index)
ProducerRef = Union[InputRef, InvRef]


@dataclass(frozen=True)
class InvocationInfo:
    """One resolved invocation occurrence."""

    index: int
    port: PortDecl
    service: ServiceDecl
    operation: OperationSig
    occurrence: int
    pos: Pos

    @property
    def node_id(self) -> str:
        return f"{self.port.id}.{self.operation.name}#{self.occurrence}"


@dataclass(frozen=True)
class Binding:
    """A lowered dataflow edge from a producer to a consumer endpoint."""

    producer: ProducerRef
    consumer: Union[tuple[str, int, Optional[str]], tuple[str, str]]  # ("inv", i, param) | ("output", name)
    tag: TypeTag


@dataclass
class TypedWorkflow:
    ast: WorkflowAst
    docs: tuple[ServiceDescriptionDoc, ...]
    invocations: tuple[InvocationInfo, ...]
    bindings: tuple[Binding, ...]
    var_types: dict[str, TypeTag]
    var_producers: dict[str, ProducerRef] = field(default_factory=dict)

    def doc_for(self, description_id: str) -> ServiceDescriptionDoc:
        for decl, doc in zip(self.ast.description_decls, self.docs):
            if decl.id == description_id:
                return doc
        raise KeyError(description_id)


class _Occurrence:
    def __init__(self, info: InvocationInfo):
        self.info = info
        self.bound: dict[str, ProducerRef] = {}

    def open_for(self, param: str) -> bool:
        return param not in self.bound


class _Checker:
    def __init__(self, ast: WorkflowAst, docs: list[ServiceDescriptionDoc]):
        self.ast = ast
        self.docs = list(docs)
        self.origin = ast.origin
        if len(docs) != len(ast.description_decls):
            raise ResolveError(
                f"expected {len(ast.description_decls)} description documents, got {len(docs)}",
                1, 1, self.origin,
            )
        self.doc_by_desc = {d.id: doc for d, doc in zip(ast.description_decls, docs)}
        self.occurrences: list[_Occurrence] = []
        self.by_invocation: dict[tuple[str, str], list[int]] = {}
        self.bindings: list[Binding] = []
        self.var_types: dict[str, TypeTag] = {v.name: v.tag for v in ast.inputs}
        self.output_tags = {v.name: v.tag for v in ast.outputs}
        self.var_values: dict[str, tuple[ProducerRef, TypeTag]] = {
            v.name: (("input", v.name), v.tag) for v in ast.inputs
        }
        self.bound_outputs: set[str] = set()
        self.var_producers: dict[str, ProducerRef] = {}

    # --- declaration-level checks ---

    def check_decls(self) -> None:
        for svc in self.ast.service_decls:
            doc = self.doc_by_desc[svc.description_id]
            if doc.service_name != svc.service_name:
                raise ResolveError(
                    f"description {svc.description_id!r} defines service "
                    f"{doc.service_name!r}, not {svc.service_name!r}",
                    svc.pos.line, svc.pos.column, self.origin,
                )
        for port in self.ast.port_decls:
            doc = self._doc_for_service(port.service_id)
            if doc.port(port.port_name) is None:
                raise ResolveError(
                    f"service {doc.service_name!r} has no port {port.port_name!r}",
                    port.pos.line, port.pos.column, self.origin,
                )

    def _doc_for_service(self, service_id: str) -> ServiceDescriptionDoc:
        svc = self.ast.service(service_id)
        assert svc is not None  # parser resolved the reference
        return self.doc_by_desc[svc.description_id]

    def _signature(self, ref: InvocationRef) -> tuple[OperationSig, PortDecl, ServiceDecl]:
        port = self.ast.port(ref.port_id)
        assert port is not None
        service = self.ast.service(port.service_id)
        assert service is not None
        doc = self.doc_by_desc[service.description_id]
        port_desc = doc.port(port.port_name)
        assert port_desc is not None  # checked in check_decls
        sig = port_desc.operation(ref.operation)
        if sig is None:
            raise ResolveError(
                f"port {port.port_name!r} of service {service.service_name!r} "
                f"has no operation {ref.operation!r}",
                ref.pos.line, ref.pos.column, self.origin,
            )
        return sig, port, service

    # --- occurrence management ---

    def _new_occurrence(self, ref: InvocationRef) -> _Occurrence:
        sig, port, service = self._signature(ref)
        key = (ref.port_id, ref.operation)
        nth = len(self.by_invocation.get(key, []))
        info = InvocationInfo(
            index=len(self.occurrences),
            port=port,
            service=service,
            operation=sig,
            occurrence=nth,
            pos=ref.pos,
        )
        occ = _Occurrence(info)
        self.occurrences.append(occ)
        self.by_invocation.setdefault(key, []).append(info.index)
        return occ

    def _source_occurrence(self, ref: InvocationRef) -> _Occurrence:
        key = (ref.port_id, ref.operation)
        indices = self.by_invocation.get(key)
        if indices:
            return self.occurrences[indices[-1]]
        return self._new_occurrence(ref)

    def _target_occurrence(self, ref: InvocationRef, param: str) -> _Occurrence:
        key = (ref.port_id, ref.operation)
        for idx in reversed(self.by_invocation.get(key, [])):
            if self.occurrences[idx].open_for(param):
                return self.occurrences[idx]
        return self._new_occurrence(ref)

    # --- flow lowering ---

    def source_value(self, ep: FlowEndpoint) -> tuple[ProducerRef, TypeTag]:
        if isinstance(ep, VarRef):
            # parser guarantees the variable is readable here
            return self.var_values[ep.name]
        occ = self._source_occurrence(ep)
        return ("inv", occ.info.index), occ.info.operation.returns

    def bind_target(self, ep: FlowEndpoint, producer: ProducerRef, tag: TypeTag) -> None:
        if isinstance(ep, VarRef):
            self.bind_variable(ep, producer, tag)
            return
        sig, _port, _service = self._signature(ep)
        if sig.arity == 0:
            raise ArityError(
                f"operation {ep.operation!r} takes no input parameters",
                ep.pos.line, ep.pos.column, self.origin,
            )
        if ep.param is None:
            if sig.arity > 1:
                raise ArityError(
                    f"operation {ep.operation!r} takes {sig.arity} parameters; "
                    f"use a parameter suffix to select one",
                    ep.pos.line, ep.pos.column, self.origin,
                )
            param = sig.params[0][0]
        else:
            if sig.param_tag(ep.param) is None:
                raise ResolveError(
                    f"operation {ep.operation!r} has no parameter {ep.param!r}",
                    ep.pos.line, ep.pos.column, self.origin,
                )
            param = ep.param
        expected = sig.param_tag(param)
        assert expected is not None
        unified = unify(tag, expected)
        if unified is None:
            raise TypeCheckError(
                f"operation {ep.operation!r} parameter {param!r} expects "
                f"{expected.value}, found {tag.value}",
                ep.pos.line, ep.pos.column, self.origin,
                expected=expected, found=tag,
            )
        occ = self._target_occurrence(ep, param)
        occ.bound[param] = producer
        self.bindings.append(
            Binding(
                producer=producer,
                consumer=("inv", occ.info.index, param if sig.arity > 1 else None),
                tag=unified,
            )
        )

    def bind_variable(self, ep: VarRef, producer: ProducerRef, tag: TypeTag) -> None:
        name = ep.name
        if name in self.output_tags:
            if name in self.bound_outputs:
                raise DuplicateBindingError(
                    f"output {name!r} is bound more than once",
                    ep.pos.line, ep.pos.column, self.origin,
                )
            expected = self.output_tags[name]
            unified = unify(tag, expected)
            if unified is None:
                raise TypeCheckError(
                    f"output {name!r} expects {expected.value}, found {tag.value}",
                    ep.pos.line, ep.pos.column, self.origin,
                    expected=expected, found=tag,
                )
            self.bound_outputs.add(name)
            self.var_producers[name] = producer
            # the bound output is readable as a source of the producing value
            self.var_values[name] = (producer, unified)
            self.bindings.append(Binding(producer=producer, consumer=("output", name), tag=unified))
            return
        if name in self.var_values:
            raise DuplicateBindingError(
                f"variable {name!r} is bound more than once",
                ep.pos.line, ep.pos.column, self.origin,
            )
        # intermediate variable: an alias for the producing value
        self.var_values[name] = (producer, tag)
        self.var_types[name] = tag
        self.var_producers[name] = producer

    def run(self) -> TypedWorkflow:
        self.check_decls()
        for stmt in self.ast.flow_stmts:
            producer, tag = self.source_value(stmt.source)
            for target in stmt.targets:
                self.bind_target(target, producer, tag)
        for decl in self.ast.outputs:
            if decl.name not in self.bound_outputs:
                raise UnboundOutputError(
                    f"output {decl.name!r} is never assigned",
                    decl.pos.line, decl.pos.column, self.origin,
                )
        for occ in self.occurrences:
            missing = [p for p, _ in occ.info.operation.params if p not in occ.bound]
            if missing:
                raise ArityError(
                    f"operation {occ.info.operation.name!r} expects "
                    f"{occ.info.operation.arity} arguments, "
                    f"{occ.info.operation.arity - len(missing)} bound "
                    f"(missing: {', '.join(missing)})",
                    occ.info.pos.line, occ.info.pos.column, self.origin,
                )
        for decl in self.ast.outputs:
            self.var_types[decl.name] = self.output_tags[decl.name]
        return TypedWorkflow(
            ast=self.ast,
            docs=tuple(self.docs),
            invocations=tuple(occ.info for occ in self.occurrences),
            bindings=tuple(self.bindings),
            var_types=dict(self.var_types),
            var_producers=dict(self.var_producers),
        )


def typecheck(ast: WorkflowAst, docs: list[ServiceDescriptionDoc]) -> TypedWorkflow:
    """Check the workflow against its service descriptions.

    ``docs`` must be in description-declaration order, as returned by
    ``resolve_descriptions``.
    """
    return _Checker(ast, docs).run()
