"""Executable graph representation of a workflow.

A DAG whose vertices are service invocations plus boundary nodes for the
workflow's inputs and outputs, and whose edges are data dependencies.
Immutable after construction.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Union

from .dsl.ast import TypeTag
from .dsl.descriptions import OperationSig
from .dsl.typecheck import TypedWorkflow
from .errors import CycleError, UnknownNodeError


@dataclass(frozen=True)
class InputNode:
    id: str
    name: str
    tag: TypeTag


@dataclass(frozen=True)
class OutputNode:
    id: str
    name: str
    tag: TypeTag


@dataclass(frozen=True)
class InvocationNode:
    id: str
    port_id: str
    port_name: str
    service_id: str
    service_name: str
    description_id: str
    operation: OperationSig
    occurrence: int

    @property
    def label(self) -> str:
        return f"{self.port_id}.{self.operation.name}"


Node = Union[InputNode, OutputNode, InvocationNode]


@dataclass(frozen=True)
class DataEdge:
    src: str
    dst: str
    param: Optional[str]
    tag: TypeTag


class DescEntry(NamedTuple):
    id: str
    url: str


class ServiceEntry(NamedTuple):
    id: str
    description_id: str
    service_name: str


class PortEntry(NamedTuple):
    id: str
    service_id: str
    port_name: str


@dataclass(frozen=True)
class Catalog:
    """Declaration tables carried along for standalone re-encoding."""

    descriptions: tuple[DescEntry, ...]
    services: tuple[ServiceEntry, ...]
    ports: tuple[PortEntry, ...]

    def description_url(self, description_id: str) -> str:
        for d in self.descriptions:
            if d.id == description_id:
                return d.url
        raise KeyError(description_id)


@dataclass(frozen=True)
class GraphMeta:
    name: str
    uid: Optional[str]
    origin: str
    catalog: Catalog


class WorkflowGraph:
    """Immutable invocation DAG with typed data-dependency edges."""

    def __init__(self, nodes: Iterable[Node], edges: Iterable[DataEdge], meta: GraphMeta,
                 value_hints: Optional[dict[str, str]] = None):
        self.nodes: dict[str, Node] = {n.id: n for n in nodes}
        self.edges: tuple[DataEdge, ...] = tuple(edges)
        self.meta = meta
        # variable names the source text gave to invocation outputs
        self.value_hints: dict[str, str] = dict(value_hints or {})
        self._succ: dict[str, list[DataEdge]] = {nid: [] for nid in self.nodes}
        self._pred: dict[str, list[DataEdge]] = {nid: [] for nid in self.nodes}
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise UnknownNodeError(f"edge {e.src}->{e.dst} references an unknown node")
            self._succ[e.src].append(e)
            self._pred[e.dst].append(e)
        self._assert_acyclic()

    # --- structure queries ---

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def out_edges(self, node_id: str) -> list[DataEdge]:
        self.node(node_id)
        return list(self._succ[node_id])

    def in_edges(self, node_id: str) -> list[DataEdge]:
        self.node(node_id)
        return list(self._pred[node_id])

    def successors(self, node_id: str) -> list[str]:
        return [e.dst for e in self.out_edges(node_id)]

    def predecessors(self, node_id: str) -> list[str]:
        return [e.src for e in self.in_edges(node_id)]

    def input_nodes(self) -> list[InputNode]:
        return [n for n in self.nodes.values() if isinstance(n, InputNode)]

    def output_nodes(self) -> list[OutputNode]:
        return [n for n in self.nodes.values() if isinstance(n, OutputNode)]

    def invocation_nodes(self) -> list[InvocationNode]:
        return [n for n in self.nodes.values() if isinstance(n, InvocationNode)]

    def _assert_acyclic(self) -> None:
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {nid: WHITE for nid in self.nodes}
        stack_path: list[str] = []

        def visit(start: str) -> None:
            stack: list[tuple[str, Iterable[str]]] = [(start, iter(self.successors(start)))]
            color[start] = GRAY
            stack_path.append(start)
            while stack:
                nid, it = stack[-1]
                advanced = False
                for nxt in it:
                    if color[nxt] == GRAY:
                        cycle = stack_path[stack_path.index(nxt):] + [nxt]
                        raise CycleError(cycle)
                    if color[nxt] == WHITE:
                        color[nxt] = GRAY
                        stack_path.append(nxt)
                        stack.append((nxt, iter(self.successors(nxt))))
                        advanced = True
                        break
                if not advanced:
                    color[nid] = BLACK
                    stack_path.pop()
                    stack.pop()

        for nid in self.nodes:
            if color[nid] == WHITE:
                visit(nid)


def build_graph(typed: TypedWorkflow) -> WorkflowGraph:
    """Materialize the typed workflow as an invocation DAG.

    Raises CycleError (with one offending node sequence) if the flow
    statements wire invocations into a cycle.
    """
    ast = typed.ast
    nodes: list[Node] = []
    for decl in ast.inputs:
        nodes.append(InputNode(id=f"in:{decl.name}", name=decl.name, tag=decl.tag))
    inv_ids: dict[int, str] = {}
    for info in typed.invocations:
        nid = info.node_id
        inv_ids[info.index] = nid
        nodes.append(
            InvocationNode(
                id=nid,
                port_id=info.port.id,
                port_name=info.port.port_name,
                service_id=info.service.id,
                service_name=info.service.service_name,
                description_id=info.service.description_id,
                operation=info.operation,
                occurrence=info.occurrence,
            )
        )
    for decl in ast.outputs:
        nodes.append(OutputNode(id=f"out:{decl.name}", name=decl.name, tag=decl.tag))

    def producer_id(ref) -> str:
        kind, key = ref
        return f"in:{key}" if kind == "input" else inv_ids[key]

    edges: list[DataEdge] = []
    for b in typed.bindings:
        src = producer_id(b.producer)
        if b.consumer[0] == "inv":
            _, idx, param = b.consumer
            edges.append(DataEdge(src=src, dst=inv_ids[idx], param=param, tag=b.tag))
        else:
            _, name = b.consumer
            edges.append(DataEdge(src=src, dst=f"out:{name}", param=None, tag=b.tag))

    catalog = Catalog(
        descriptions=tuple(DescEntry(d.id, d.url) for d in ast.description_decls),
        services=tuple(ServiceEntry(s.id, s.description_id, s.service_name) for s in ast.service_decls),
        ports=tuple(PortEntry(p.id, p.service_id, p.port_name) for p in ast.port_decls),
    )
    hints: dict[str, str] = {}
    for name, ref in typed.var_producers.items():
        if ref[0] == "inv" and name not in {o.name for o in ast.outputs}:
            hints.setdefault(inv_ids[ref[1]], name)
    meta = GraphMeta(name=ast.name, uid=ast.uid, origin=ast.origin, catalog=catalog)
    return WorkflowGraph(nodes, edges, meta, value_hints=hints)


def topo_order(g: WorkflowGraph) -> list[str]:
    """Topological order of node ids, ties broken lexicographically."""
    indeg = {nid: len(g.in_edges(nid)) for nid in g.nodes}
    ready = [nid for nid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for nxt in g.successors(nid):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    assert len(order) == len(g.nodes)  # graph is acyclic by construction
    return order


def dependency_closure(g: WorkflowGraph, node_ids: Iterable[str]) -> set[str]:
    """All ancestors of the given nodes (the nodes themselves excluded)."""
    seeds = list(node_ids)
    for nid in seeds:
        g.node(nid)
    seen: set[str] = set()
    frontier = list(seeds)
    while frontier:
        nid = frontier.pop()
        for prev in g.predecessors(nid):
            if prev not in seen:
                seen.add(prev)
                frontier.append(prev)
    return seen


def value_names(g: WorkflowGraph) -> dict[str, str]:
    """Assign a variable name to every value-producing node.

    Inputs keep their declared names; an invocation whose result feeds a
    workflow output takes that output's name; source-level intermediate
    names are preserved; everything else gets a deterministic short name
    derived from topological position.
    """
    order = topo_order(g)
    pos = {nid: i for i, nid in enumerate(order)}
    names: dict[str, str] = {}
    used: set[str] = set()
    for node in g.input_nodes():
        names[node.id] = node.name
        used.add(node.name)
    for node in g.output_nodes():
        used.add(node.name)
    used.update(g.value_hints.values())

    def fresh(start: int) -> str:
        i = start
        while True:
            candidate = chr(ord("a") + i) if i < 26 else f"v{i}"
            if candidate not in used:
                return candidate
            i += 1

    for nid in order:
        node = g.nodes[nid]
        if not isinstance(node, InvocationNode):
            continue
        outs = [g.nodes[e.dst] for e in g.out_edges(nid)]
        out_names = sorted(n.name for n in outs if isinstance(n, OutputNode))
        if out_names:
            names[nid] = out_names[0]
        elif nid in g.value_hints:
            names[nid] = g.value_hints[nid]
        else:
            names[nid] = fresh(pos[nid])
        used.add(names[nid])
    return names


def to_dot(g: WorkflowGraph) -> str:
    """Debug export in DOT format; not a stability contract."""
    lines = ["digraph workflow {"]
    for nid, node in g.nodes.items():
        if isinstance(node, InvocationNode):
            label = node.label
            shape = "box"
        elif isinstance(node, InputNode):
            label = f"input {node.name}"
            shape = "ellipse"
        else:
            label = f"output {node.name}"
            shape = "ellipse"
        lines.append(f'  "{nid}" [label="{label}", shape={shape}];')
    for e in g.edges:
        attr = f' [label="{e.param}"]' if e.param else ""
        lines.append(f'  "{e.src}" -> "{e.dst}"{attr};')
    lines.append("}")
    return "\n".join(lines)
