"""The workflow engine runtime.

An engine compiles deployed specifications, buffers named values as they
arrive from peers, fires invocations dataflow-style once their inputs
are present, and forwards result values to other engines when a
workflow completes. External operations are serialized behind a lock;
time and ordering come entirely from the event loop.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from ..dsl import SourceUnit, parse, resolve_descriptions, typecheck
from ..dsl.ast import TypeTag, WorkflowAst, unify
from ..dsl.descriptions import DescriptionResolver
from ..errors import (
    CompileError,
    Diagnostic,
    DuplicateDeploymentError,
    DuplicateValueError,
    EngineStateError,
    InvocationError,
    OrchestraError,
    TransportError,
    TypeMismatchError,
)
from ..graph import InvocationNode, WorkflowGraph, build_graph
from ..partitioner import generate_uid, parse_uid
from ..qos import EngineInfo
from ..sim import EventLoop
from .services import ServiceDirectory
from .transport import DeployMessage, DispatchReceipt, Message, Transport, ValueMessage
from .values import Value, ValueEnvelope

log = logging.getLogger(__name__)


class RunState(Enum):
    WAITING = "waiting"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class InvocationTrace:
    node_id: str
    started_at: float
    inputs_ready_at: float
    finished_at: Optional[float] = None


@dataclass
class ForwardRecord:
    variable: str
    size_mb: float
    destination_engine: str
    destination_endpoint: str
    sent_at: float
    receipt: Optional[DispatchReceipt] = None
    attempts: int = 0


@dataclass
class Ack:
    status: str
    detail: str = ""


@dataclass
class DeployedWorkflow:
    uid: str
    base_uid: str
    ast: WorkflowAst
    graph: WorkflowGraph
    state: RunState = RunState.WAITING
    pending_inputs: dict[str, Optional[ValueEnvelope]] = field(default_factory=dict)
    values: dict[str, Value] = field(default_factory=dict)
    available_at: dict[str, float] = field(default_factory=dict)
    waiting_count: dict[str, int] = field(default_factory=dict)
    fired: set[str] = field(default_factory=set)
    trace: list[InvocationTrace] = field(default_factory=list)
    dispatches: list[ForwardRecord] = field(default_factory=list)
    started_at: Optional[float] = None
    completed_at: Optional[float] = None
    errors: list[Exception] = field(default_factory=list)

    @property
    def inputs_complete(self) -> bool:
        return all(v is not None for v in self.pending_inputs.values())

    def completion_record(self) -> "CompletionRecord":
        outputs = {
            node.name: self.values[node.id]
            for node in self.graph.output_nodes()
            if node.id in self.values
        }
        return CompletionRecord(
            uid=self.uid,
            state=self.state,
            started_at=self.started_at,
            completed_at=self.completed_at,
            outputs=outputs,
            dispatches=list(self.dispatches),
            trace=list(self.trace),
            errors=list(self.errors),
        )


@dataclass
class CompletionRecord:
    uid: str
    state: RunState
    started_at: Optional[float]
    completed_at: Optional[float]
    outputs: dict[str, Value]
    dispatches: list[ForwardRecord]
    trace: list[InvocationTrace]
    errors: list[Exception]


class Engine:
    """One peer workflow engine."""

    def __init__(
        self,
        info: EngineInfo,
        env: EventLoop,
        transport: Transport,
        services: ServiceDirectory,
        resolver: DescriptionResolver,
        retry_attempts: int = 3,
        retry_base_s: float = 0.5,
    ):
        self.info = info
        self.env = env
        self.transport = transport
        self.services = services
        self.resolver = resolver
        self.retry_attempts = retry_attempts
        self.retry_base_s = retry_base_s
        self.deployments: dict[str, DeployedWorkflow] = {}
        self.buffered: dict[tuple[str, str], ValueEnvelope] = {}
        self.value_listeners: list = []
        self._lock = threading.RLock()

    # --- wire protocol entry point ---

    def handle_message(self, message: Message) -> None:
        if isinstance(message, DeployMessage):
            self.deploy(SourceUnit(message.spec_text, message.origin))
        elif isinstance(message, ValueMessage):
            self.receive_value(message.envelope)
        else:
            raise TransportError(f"unknown message {message!r}")

    # --- public operations ---

    def deploy(self, src: SourceUnit, initial_inputs: Optional[dict[str, Value]] = None) -> str:
        """Compile and register a workflow; execution starts once inputs exist."""
        with self._lock:
            try:
                ast = parse(src)
                docs = resolve_descriptions(ast, self.resolver)
                typed = typecheck(ast, docs)
                graph = build_graph(typed)
            except Diagnostic as exc:
                raise CompileError(exc) from exc
            uid = ast.uid or generate_uid(ast.name)
            if uid in self.deployments:
                raise DuplicateDeploymentError(f"workflow {uid!r} is already deployed")
            base_uid, _ordinal = parse_uid(uid)
            dep = DeployedWorkflow(
                uid=uid,
                base_uid=base_uid,
                ast=ast,
                graph=graph,
                pending_inputs={decl.name: None for decl in ast.inputs},
            )
            for decl in ast.inputs:
                # buffered values persist: several composites of one workflow
                # may land on this engine and consume the same value
                buffered = self.buffered.get((base_uid, decl.name))
                if buffered is not None:
                    self._check_input_tag(decl.name, decl.tag, buffered.tag)
                    dep.pending_inputs[decl.name] = buffered
            if initial_inputs:
                for name, value in initial_inputs.items():
                    if name not in dep.pending_inputs:
                        raise EngineStateError(f"workflow {uid!r} declares no input {name!r}")
                    decl = next(d for d in ast.inputs if d.name == name)
                    env = ValueEnvelope(base_uid, name, decl.tag, value.size_mb, value.payload)
                    dep.pending_inputs[name] = env
            self.deployments[uid] = dep
            log.debug("engine %s deployed %s", self.info.id, uid)
            if dep.inputs_complete:
                self.env.schedule(0.0, lambda: self._start(dep))
            return uid

    def receive_value(self, envelope: ValueEnvelope) -> Ack:
        """Buffer an arriving value; start every workflow it completes."""
        with self._lock:
            base, _ordinal = parse_uid(envelope.workflow_uid)
            for listener in self.value_listeners:
                listener(envelope)
            wanting = self._deployments_wanting(base, envelope.variable)
            lacking = [d for d in wanting if d.pending_inputs[envelope.variable] is None]
            if lacking:
                for dep in lacking:
                    decl = next(d for d in dep.ast.inputs if d.name == envelope.variable)
                    self._check_input_tag(envelope.variable, decl.tag, envelope.tag)
                    dep.pending_inputs[envelope.variable] = envelope
                    if dep.state is RunState.WAITING and dep.inputs_complete:
                        self.env.schedule(0.0, self._starter(dep))
                return Ack("accepted")
            if wanting:
                raise DuplicateValueError(
                    f"value ({envelope.workflow_uid}, {envelope.variable}) already received"
                )
            key = (base, envelope.variable)
            if key in self.buffered:
                raise DuplicateValueError(
                    f"value ({envelope.workflow_uid}, {envelope.variable}) already buffered"
                )
            self.buffered[key] = envelope
            return Ack("buffered")

    def execute(self, uid: str) -> None:
        """Start a deployed workflow now; all inputs must be present."""
        with self._lock:
            dep = self._deployment(uid)
            if dep.state is not RunState.WAITING:
                raise EngineStateError(f"workflow {uid!r} is {dep.state.value}")
            if not dep.inputs_complete:
                missing = [k for k, v in dep.pending_inputs.items() if v is None]
                raise EngineStateError(f"workflow {uid!r} is missing inputs: {missing}")
            self._start(dep)

    def forward_value(self, envelope: ValueEnvelope, dest_engine: str, dest_endpoint: str,
                      owner: Optional[DeployedWorkflow] = None) -> ForwardRecord:
        """Ship a value to a peer engine, retrying transient transport failures."""
        record = ForwardRecord(
            variable=envelope.variable,
            size_mb=envelope.size_mb,
            destination_engine=dest_engine,
            destination_endpoint=dest_endpoint,
            sent_at=self.env.now(),
        )
        self._attempt_forward(record, envelope, owner)
        return record

    def completion(self, uid: str) -> CompletionRecord:
        return self._deployment(uid).completion_record()

    # --- internals ---

    def _deployment(self, uid: str) -> DeployedWorkflow:
        if uid not in self.deployments:
            raise EngineStateError(f"no deployment {uid!r} on engine {self.info.id!r}")
        return self.deployments[uid]

    def _deployments_wanting(self, base_uid: str, variable: str) -> list[DeployedWorkflow]:
        return [
            dep for dep in self.deployments.values()
            if dep.base_uid == base_uid and variable in dep.pending_inputs
        ]

    def _starter(self, dep: DeployedWorkflow):
        return lambda: self._start(dep)

    @staticmethod
    def _check_input_tag(name: str, declared: TypeTag, got: TypeTag) -> None:
        if unify(declared, got) is None:
            raise TypeMismatchError(
                f"input {name!r} declared {declared.value}, received {got.value}"
            )

    def _start(self, dep: DeployedWorkflow) -> None:
        if dep.state is not RunState.WAITING:
            return
        dep.state = RunState.RUNNING
        dep.started_at = self.env.now()
        for node in dep.graph.invocation_nodes():
            dep.waiting_count[node.id] = len(dep.graph.in_edges(node.id))
        for node in dep.graph.input_nodes():
            envelope = dep.pending_inputs[node.name]
            assert envelope is not None
            self._provide(dep, node.id, envelope.value())
        self._check_done(dep)

    def _provide(self, dep: DeployedWorkflow, node_id: str, value: Value) -> None:
        dep.values[node_id] = value
        dep.available_at[node_id] = self.env.now()
        for edge in dep.graph.out_edges(node_id):
            dst = dep.graph.nodes[edge.dst]
            if isinstance(dst, InvocationNode):
                dep.waiting_count[edge.dst] -= 1
                if dep.waiting_count[edge.dst] == 0:
                    self.env.schedule(0.0, self._firer(dep, dst))
            else:
                self._provide(dep, edge.dst, value)

    def _firer(self, dep: DeployedWorkflow, node: InvocationNode):
        return lambda: self._fire(dep, node)

    def _fire(self, dep: DeployedWorkflow, node: InvocationNode) -> None:
        if dep.state is not RunState.RUNNING:
            return
        assert node.id not in dep.fired, f"invocation {node.id} fired twice"
        dep.fired.add(node.id)
        in_edges = dep.graph.in_edges(node.id)
        args: dict[str, Value] = {}
        for edge in in_edges:
            param = edge.param or node.operation.params[0][0]
            args[param] = dep.values[edge.src]
        ready_at = max((dep.available_at[e.src] for e in in_edges), default=self.env.now())
        trace = InvocationTrace(node.id, started_at=self.env.now(), inputs_ready_at=ready_at)
        dep.trace.append(trace)
        try:
            port = self.services.port_for(node.service_name, node.port_name)
        except InvocationError as exc:
            self._fail(dep, exc)
            return

        def done(result: Value) -> None:
            if dep.state is not RunState.RUNNING:
                return
            trace.finished_at = self.env.now()
            self._provide(dep, node.id, result)
            self._check_done(dep)

        def fail(exc: Exception) -> None:
            trace.finished_at = self.env.now()
            self._fail(dep, exc if isinstance(exc, OrchestraError) else InvocationError(str(exc)))

        port.request(node.operation.name, args, done, fail)

    def _check_done(self, dep: DeployedWorkflow) -> None:
        if dep.state is not RunState.RUNNING:
            return
        if len(dep.values) < len(dep.graph.nodes):
            return
        dep.state = RunState.COMPLETED
        dep.completed_at = self.env.now()
        log.debug("engine %s completed %s at %.6f", self.info.id, dep.uid, dep.completed_at)
        for stmt in dep.ast.forward_stmts:
            out_value = dep.values[f"out:{stmt.variable}"]
            decl = next(v for v in dep.ast.outputs if v.name == stmt.variable)
            envelope = ValueEnvelope(
                workflow_uid=dep.base_uid,
                variable=stmt.variable,
                tag=decl.tag,
                size_mb=out_value.size_mb,
                payload=out_value.payload,
            )
            engine_decl = dep.ast.engine(stmt.engine_id)
            assert engine_decl is not None  # parser resolved the reference
            record = self.forward_value(envelope, stmt.engine_id, engine_decl.url, owner=dep)
            dep.dispatches.append(record)

    def _fail(self, dep: DeployedWorkflow, exc: Exception) -> None:
        # a COMPLETED workflow still fails if one of its forwards is rejected
        dep.errors.append(exc)
        if dep.state is RunState.FAILED:
            return
        dep.state = RunState.FAILED
        if dep.completed_at is None:
            dep.completed_at = self.env.now()
        log.warning("engine %s failed %s: %s", self.info.id, dep.uid, exc)

    def _attempt_forward(self, record: ForwardRecord, envelope: ValueEnvelope,
                         owner: Optional[DeployedWorkflow]) -> None:
        record.attempts += 1

        def rejected(exc: Exception) -> None:
            # the receiver refused the value; fail the sending workflow
            if owner is not None:
                self._fail(owner, TransportError(
                    f"value ({envelope.workflow_uid}, {envelope.variable}) rejected by "
                    f"{record.destination_engine}: {exc}"
                ))
                owner.errors.append(exc)

        try:
            receipt = self.transport.send(
                record.destination_endpoint,
                ValueMessage(envelope),
                envelope.size_mb,
                on_rejected=rejected,
            )
            record.receipt = receipt
        except TransportError as exc:
            if record.attempts <= self.retry_attempts - 1:
                backoff = self.retry_base_s * (2 ** (record.attempts - 1))
                self.env.schedule(backoff, lambda: self._attempt_forward(record, envelope, owner))
            else:
                record.receipt = DispatchReceipt(
                    destination=record.destination_endpoint,
                    size_mb=envelope.size_mb,
                    sent_at=record.sent_at,
                    status="failed",
                    error=exc,
                )
                if owner is not None:
                    self._fail(owner, exc)
