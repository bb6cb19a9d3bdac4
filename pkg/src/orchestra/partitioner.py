"""Workflow partitioning: decomposition, engine placement, and composition.

Decomposes an invocation graph into the finest sub-workflows that keep
directly chained same-service invocations together, selects an engine
for each via QoS analysis, and recombines same-engine sub-workflows into
self-contained composite workflows wired up with forward statements.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Optional

from .dsl.ast import TypeTag
from .errors import CycleError, MissingQosError, NoEngineError
from .graph import (
    Catalog,
    DataEdge,
    InputNode,
    InvocationNode,
    OutputNode,
    WorkflowGraph,
    topo_order,
    value_names,
)
from .qos import (
    Cluster,
    EngineInfo,
    QosMatrix,
    TransmissionEstimate,
    cluster_engines,
    eliminate_clusters,
    rank_and_select,
    rank_engines,
)

DEFAULT_CLUSTER_COUNT = 3


@dataclass(frozen=True)
class ExternalInput:
    """A value a sub-workflow needs from outside: name, type, producing node."""

    name: str
    tag: TypeTag
    producer: str


@dataclass(frozen=True)
class ExternalOutput:
    """A value a sub-workflow provides to the outside world."""

    name: str
    tag: TypeTag
    consumers: tuple[str, ...]


@dataclass(frozen=True)
class SubWorkflow:
    id: int
    nodes: tuple[str, ...]
    service_id: str
    required_inputs: tuple[ExternalInput, ...]
    produced_outputs: tuple[ExternalOutput, ...]


def decompose(g: WorkflowGraph) -> list[SubWorkflow]:
    """Split the graph into the maximum number of smallest sub-workflows.

    Each sub-workflow is a single invocation, or several invocations of
    the same service joined by direct data dependencies (a chain passing
    through no other service). Result is ordered by topological position
    of each sub-workflow's first node.
    """
    invocations = {n.id: n for n in g.invocation_nodes()}
    parent = {nid: nid for nid in invocations}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for e in g.edges:
        if e.src in invocations and e.dst in invocations:
            if invocations[e.src].service_name == invocations[e.dst].service_name:
                union(e.src, e.dst)

    order = topo_order(g)
    pos = {nid: i for i, nid in enumerate(order)}
    groups: dict[str, list[str]] = {}
    for nid in sorted(invocations, key=lambda n: pos[n]):
        groups.setdefault(find(nid), []).append(nid)

    names = value_names(g)
    subs = []
    for idx, members in enumerate(sorted(groups.values(), key=lambda ms: pos[ms[0]])):
        member_set = set(members)
        required: dict[str, ExternalInput] = {}
        produced: dict[str, ExternalOutput] = {}
        for nid in members:
            for e in g.in_edges(nid):
                if e.src not in member_set:
                    src = g.nodes[e.src]
                    tag = src.tag if isinstance(src, InputNode) else src.operation.returns
                    required.setdefault(e.src, ExternalInput(names[e.src], tag, e.src))
            externals = [e.dst for e in g.out_edges(nid) if e.dst not in member_set]
            if externals:
                node = invocations[nid]
                produced[nid] = ExternalOutput(
                    names[nid], node.operation.returns, tuple(sorted(externals))
                )
        subs.append(
            SubWorkflow(
                id=idx,
                nodes=tuple(members),
                service_id=invocations[members[0]].service_name,
                required_inputs=tuple(sorted(required.values(), key=lambda r: pos[r.producer])),
                produced_outputs=tuple(sorted(produced.values(), key=lambda p: p.name)),
            )
        )
    return subs


# --- size estimation ---

class SizeEstimator:
    """Pre-execution estimate of the megabytes flowing through a graph.

    Declared workflow-input sizes are propagated through the DAG with an
    identity transfer function: every invocation's output size is the
    sum of its input sizes. Inputs without a declared size default to
    ``default_input_mb``.
    """

    def __init__(
        self,
        g: WorkflowGraph,
        input_sizes: Optional[dict[str, float]] = None,
        default_input_mb: float = 1.0,
    ):
        self.graph = g
        declared = input_sizes or {}
        self._sizes: dict[str, float] = {}
        for nid in topo_order(g):
            node = g.nodes[nid]
            if isinstance(node, InputNode):
                self._sizes[nid] = float(declared.get(node.name, default_input_mb))
            elif isinstance(node, InvocationNode):
                self._sizes[nid] = sum(self._sizes[e.src] for e in g.in_edges(nid))
            else:
                self._sizes[nid] = sum(self._sizes[e.src] for e in g.in_edges(nid))

    def output_size(self, node_id: str) -> float:
        return self._sizes[node_id]

    def sub_workflow_input(self, sub: SubWorkflow) -> float:
        return sum(self._sizes[r.producer] for r in sub.required_inputs)


# --- placement ---

@dataclass
class SubPlacementAudit:
    sub_id: int
    service_id: str
    input_mb: float
    clusters: list[Cluster]
    eliminated: list[Cluster]
    estimates: list[TransmissionEstimate]
    selected: TransmissionEstimate
    argmin_excluded: bool = False

    def to_json_dict(self) -> dict:
        def cluster_dict(c: Cluster) -> dict:
            return {
                "members": sorted(c.members),
                "centroid_latency_s": c.centroid[0],
                "centroid_bandwidth_mbps": c.centroid[1],
            }

        return {
            "sub_workflow": self.sub_id,
            "service": self.service_id,
            "input_mb": self.input_mb,
            "clusters": [cluster_dict(c) for c in self.clusters],
            "eliminated": [cluster_dict(c) for c in self.eliminated],
            "estimates": [
                {"engine": t.engine_id, "seconds": t.seconds}
                for t in self.estimates
            ],
            "selected": self.selected.engine_id,
            "argmin_excluded": self.argmin_excluded,
        }


@dataclass
class PlacementPlan:
    assignments: dict[int, str]
    audit: dict[int, SubPlacementAudit]
    engines: dict[str, EngineInfo]

    def engine_for(self, sub_id: int) -> EngineInfo:
        return self.engines[self.assignments[sub_id]]

    def to_json_dict(self) -> dict:
        return {
            "assignments": {str(k): v for k, v in sorted(self.assignments.items())},
            "audit": [self.audit[k].to_json_dict() for k in sorted(self.audit)],
        }


def place(
    subs: list[SubWorkflow],
    engines: list[EngineInfo],
    qos: QosMatrix,
    sizes: SizeEstimator,
    k: int = DEFAULT_CLUSTER_COUNT,
) -> PlacementPlan:
    """Select an engine for every sub-workflow.

    Per sub-workflow: cluster the candidate engines by their QoS to the
    sub-workflow's service, drop dominated clusters, then pick the
    surviving engine with the smallest predicted transmission time.
    """
    if not engines:
        raise NoEngineError("at least one engine is required for placement")
    ids = [e.id for e in engines]
    assignments: dict[int, str] = {}
    audits: dict[int, SubPlacementAudit] = {}
    for sub in subs:
        for eid in ids:
            if not qos.has(eid, sub.service_id):
                raise MissingQosError(eid, sub.service_id)
        size_mb = sizes.sub_workflow_input(sub)
        features = {eid: qos.sample(eid, sub.service_id) for eid in ids}
        clusters = cluster_engines(features, k=min(k, len(ids)), size_mb=size_mb)
        survivors = eliminate_clusters(clusters)
        eliminated = [c for c in clusters if c not in survivors]
        surviving_ids = sorted(set().union(*(c.members for c in survivors)))
        estimates = rank_engines(surviving_ids, sub.service_id, qos, size_mb)
        selected = rank_and_select(surviving_ids, sub.service_id, qos, size_mb)
        unfiltered_best = rank_engines(ids, sub.service_id, qos, size_mb)[0]
        assignments[sub.id] = selected.engine_id
        audits[sub.id] = SubPlacementAudit(
            sub_id=sub.id,
            service_id=sub.service_id,
            input_mb=size_mb,
            clusters=clusters,
            eliminated=eliminated,
            estimates=estimates,
            selected=selected,
            argmin_excluded=unfiltered_best.engine_id not in surviving_ids,
        )
    return PlacementPlan(
        assignments=assignments,
        audit=audits,
        engines={e.id: e for e in engines},
    )


# --- composition ---

@dataclass(frozen=True)
class CompositeInput:
    name: str
    tag: TypeTag
    producer: str


@dataclass(frozen=True)
class CompositeOutput:
    name: str
    tag: TypeTag
    producer: str


@dataclass(frozen=True)
class Passthrough:
    """A workflow input wired straight to a workflow output."""

    input_name: str
    output_name: str
    tag: TypeTag


@dataclass
class CompositeWorkflow:
    """Sub-workflows merged for one engine, re-encodable as standalone source."""

    name: str
    uid: Optional[str]
    ordinal: int
    host_engine: str
    members: tuple[InvocationNode, ...]
    internal_edges: tuple[DataEdge, ...]
    inbound_edges: tuple[DataEdge, ...]            # external producer -> member
    inputs: tuple[CompositeInput, ...]
    outputs: tuple[CompositeOutput, ...]
    forwards: tuple[tuple[str, str], ...]          # (variable, engine id)
    engine_decls: tuple[tuple[str, str], ...]      # (engine id, endpoint URL)
    catalog: Catalog
    names: dict[str, str] = field(default_factory=dict)  # node id -> value name
    passthroughs: tuple[Passthrough, ...] = ()

    @property
    def full_uid(self) -> Optional[str]:
        if self.uid is None:
            return None
        return f"{self.uid}.{self.ordinal}" if self.ordinal else self.uid


def generate_uid(base: str, seed: Optional[int] = None) -> str:
    """A globally unique hex identifier for one workflow execution.

    A fixed ``seed`` gives a deterministic value; without one the id is
    drawn from system entropy.
    """
    rng = random.Random(seed) if seed is not None else random.SystemRandom()
    material = f"{base}:{rng.getrandbits(128):032x}".encode()
    return hashlib.md5(material).hexdigest()


def parse_uid(uid: str) -> tuple[str, Optional[int]]:
    """Split a dotted uid into (base, ordinal); ordinal None if absent."""
    if "." in uid:
        base, last = uid.rsplit(".", 1)
        if last.isdigit():
            return base, int(last)
    return uid, None


def _convex_groups(
    g: WorkflowGraph, subs: list[SubWorkflow], plan: PlacementPlan
) -> list[tuple[str, list[SubWorkflow]]]:
    """Group same-engine sub-workflows without creating circular composites.

    Same-engine sub-workflows are merged greedily in topological order,
    but only while no dataflow path leaves the group and re-enters it
    through a sub-workflow outside the group; such a merge would produce
    composite workflows that each wait on the other's output and never
    start. Sub-workflows that cannot merge open a new composite on the
    same engine.
    """
    node_sub = {nid: sub.id for sub in subs for nid in sub.nodes}
    adj: dict[int, set[int]] = {sub.id: set() for sub in subs}
    for e in g.edges:
        src_sub, dst_sub = node_sub.get(e.src), node_sub.get(e.dst)
        if src_sub is not None and dst_sub is not None and src_sub != dst_sub:
            adj[src_sub].add(dst_sub)

    reach: dict[int, set[int]] = {}

    def reach_of(sid: int) -> set[int]:
        if sid not in reach:
            seen: set[int] = set()
            frontier = list(adj[sid])
            while frontier:
                t = frontier.pop()
                if t not in seen:
                    seen.add(t)
                    frontier.extend(adj[t])
            reach[sid] = seen
        return reach[sid]

    groups: list[list[SubWorkflow]] = []
    engines: list[str] = []
    last_group_of: dict[str, int] = {}

    def safe_to_merge(group: list[SubWorkflow], sub: SubWorkflow) -> bool:
        member_ids = {m.id for m in group}
        if member_ids & reach_of(sub.id):
            return False
        merged = member_ids | {sub.id}
        outward = set().union(*(reach_of(sid) for sid in merged))
        for t in outward - merged:
            if reach_of(t) & merged:
                return False
        return True

    for sub in subs:
        engine = plan.assignments[sub.id]
        gi = last_group_of.get(engine)
        if gi is not None and safe_to_merge(groups[gi], sub):
            groups[gi].append(sub)
        else:
            groups.append([sub])
            engines.append(engine)
            last_group_of[engine] = len(groups) - 1
    return list(zip(engines, groups))


def _assert_composites_acyclic(g, ordered_groups, node_sub, uid) -> None:
    """Interdependent composites would deadlock each other's input gates."""
    group_of_sub = {
        sub.id: gi for gi, (_e, group) in enumerate(ordered_groups) for sub in group
    }
    adj: dict[int, set[int]] = {gi: set() for gi in range(len(ordered_groups))}
    for e in g.edges:
        src_sub, dst_sub = node_sub.get(e.src), node_sub.get(e.dst)
        if src_sub is None or dst_sub is None:
            continue
        a, b = group_of_sub[src_sub], group_of_sub[dst_sub]
        if a != b:
            adj[a].add(b)
    seen: dict[int, int] = {}

    def visit(gi: int, stack: list[int]) -> None:
        seen[gi] = 1
        stack.append(gi)
        for nxt in sorted(adj[gi]):
            if seen.get(nxt) == 1:
                cycle = stack[stack.index(nxt):] + [nxt]
                raise CycleError([f"{uid}.{x + 1}" for x in cycle])
            if nxt not in seen:
                visit(nxt, stack)
        stack.pop()
        seen[gi] = 2

    for gi in adj:
        if gi not in seen:
            visit(gi, [])


def compose(
    g: WorkflowGraph,
    subs: list[SubWorkflow],
    plan: PlacementPlan,
    sink: str,
    base_uid: Optional[str] = None,
) -> list[CompositeWorkflow]:
    """Merge same-engine sub-workflows into self-contained composites.

    Cross-sub dependencies inside one composite become direct edges;
    every external dependency becomes a producer output, a forward to
    the consumer's engine, and a consumer input. Workflow outputs are
    forwarded to ``sink``. Composites are numbered in topological order
    of their earliest node. Same-engine sub-workflows stay in one
    composite unless merging would make composites mutually dependent.
    """
    if sink not in plan.engines:
        raise NoEngineError(f"sink engine {sink!r} is not part of the placement plan")
    uid = base_uid or g.meta.uid or generate_uid(g.meta.name)
    order = topo_order(g)
    pos = {nid: i for i, nid in enumerate(order)}
    names = value_names(g)

    node_sub = {nid: sub.id for sub in subs for nid in sub.nodes}
    ordered_groups = sorted(
        _convex_groups(g, subs, plan),
        key=lambda kv: min(pos[nid] for s in kv[1] for nid in s.nodes),
    )

    passthrough_edges = [
        e for e in g.edges
        if isinstance(g.nodes[e.src], InputNode) and isinstance(g.nodes[e.dst], OutputNode)
    ]
    if not ordered_groups:
        ordered_groups = [(sink, [])]

    _assert_composites_acyclic(g, ordered_groups, node_sub, uid)

    composites = []
    for ordinal0, (engine_id, group) in enumerate(ordered_groups):
        ordinal = ordinal0 + 1
        members = sorted((nid for sub in group for nid in sub.nodes), key=lambda n: pos[n])
        member_set = set(members)
        internal = [e for e in g.edges if e.src in member_set and e.dst in member_set]
        inbound = [e for e in g.edges if e.dst in member_set and e.src not in member_set]

        inputs: dict[str, CompositeInput] = {}
        outputs: dict[str, CompositeOutput] = {}
        forward_dests: dict[str, list[str]] = {}
        for nid in members:
            for e in g.in_edges(nid):
                if e.src in member_set:
                    continue
                src = g.nodes[e.src]
                tag = src.tag if isinstance(src, InputNode) else src.operation.returns
                inputs.setdefault(e.src, CompositeInput(names[e.src], tag, e.src))
            node = g.nodes[nid]
            dests: list[str] = []
            for e in g.out_edges(nid):
                if e.dst in member_set:
                    continue
                if isinstance(g.nodes[e.dst], OutputNode):
                    dests.append(sink)
                else:
                    dests.append(plan.assignments[node_sub[e.dst]])
            if dests:
                outputs[nid] = CompositeOutput(names[nid], node.operation.returns, nid)
                # forwards to consuming engines first, sink last
                forward_dests[names[nid]] = sorted(set(dests) - {sink}) + (
                    [sink] if sink in dests else []
                )

        passthroughs: tuple[Passthrough, ...] = ()
        if ordinal == 1 and passthrough_edges:
            pts = []
            for e in passthrough_edges:
                src, dst = g.nodes[e.src], g.nodes[e.dst]
                inputs.setdefault(e.src, CompositeInput(src.name, src.tag, e.src))
                pts.append(Passthrough(src.name, dst.name, e.tag))
                forward_dests[dst.name] = [sink]
            passthroughs = tuple(pts)

        ordered_inputs = tuple(sorted(inputs.values(), key=lambda c: pos[c.producer]))
        ordered_outputs = tuple(sorted(outputs.values(), key=lambda c: pos[c.producer]))
        forwards: list[tuple[str, str]] = []
        for out in ordered_outputs:
            for dest in forward_dests[out.name]:
                forwards.append((out.name, dest))
        for pt in passthroughs:
            forwards.append((pt.output_name, sink))

        used_descs, used_svcs, used_ports = set(), set(), set()
        for nid in members:
            node = g.nodes[nid]
            used_descs.add(node.description_id)
            used_svcs.add(node.service_id)
            used_ports.add(node.port_id)
        catalog = Catalog(
            descriptions=tuple(d for d in g.meta.catalog.descriptions if d.id in used_descs),
            services=tuple(s for s in g.meta.catalog.services if s.id in used_svcs),
            ports=tuple(p for p in g.meta.catalog.ports if p.id in used_ports),
        )
        engine_decl_ids: list[str] = []
        for _var, dest in forwards:
            if dest not in engine_decl_ids:
                engine_decl_ids.append(dest)
        engine_decls = tuple((eid, plan.engines[eid].endpoint) for eid in engine_decl_ids)

        comp_names = {nid: names[nid] for nid in members}
        comp_names.update({c.producer: c.name for c in ordered_inputs})
        composites.append(
            CompositeWorkflow(
                name=g.meta.name,
                uid=uid,
                ordinal=ordinal,
                host_engine=engine_id,
                members=tuple(g.nodes[nid] for nid in members),
                internal_edges=tuple(internal),
                inbound_edges=tuple(inbound),
                inputs=ordered_inputs,
                outputs=ordered_outputs,
                forwards=tuple(forwards),
                engine_decls=engine_decls,
                catalog=catalog,
                names=comp_names,
                passthroughs=passthroughs,
            )
        )
    return composites


def as_single_composite(g: WorkflowGraph, uid: Optional[str] = None) -> CompositeWorkflow:
    """View a whole graph as one composite with no forwards (for re-encoding)."""
    order = topo_order(g)
    pos = {nid: i for i, nid in enumerate(order)}
    names = value_names(g)
    members = sorted((n.id for n in g.invocation_nodes()), key=lambda n: pos[n])
    member_set = set(members)
    internal = [e for e in g.edges if e.src in member_set and e.dst in member_set]
    inbound = [e for e in g.edges if e.dst in member_set and e.src not in member_set]
    inputs = tuple(
        CompositeInput(n.name, n.tag, n.id)
        for n in sorted(g.input_nodes(), key=lambda n: pos[n.id])
    )
    outputs = []
    passthroughs = []
    for out in sorted(g.output_nodes(), key=lambda n: pos[n.id]):
        (edge,) = g.in_edges(out.id)
        src = g.nodes[edge.src]
        if isinstance(src, InputNode):
            passthroughs.append(Passthrough(src.name, out.name, edge.tag))
        else:
            outputs.append(CompositeOutput(out.name, out.tag, edge.src))
    comp_names = dict(names)
    return CompositeWorkflow(
        name=g.meta.name,
        uid=uid if uid is not None else g.meta.uid,
        ordinal=0,
        host_engine="",
        members=tuple(g.nodes[nid] for nid in members),
        internal_edges=tuple(internal),
        inbound_edges=tuple(inbound),
        inputs=inputs,
        outputs=tuple(sorted(outputs, key=lambda c: pos[c.producer])),
        forwards=(),
        engine_decls=(),
        catalog=g.meta.catalog,
        names=comp_names,
        passthroughs=tuple(passthroughs),
    )
