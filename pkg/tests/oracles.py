"""Independent oracles and generators shared by unit and acceptance tests."""

from __future__ import annotations

import random

from orchestra.dsl import InMemoryResolver, SourceUnit, TypeTag, parse, resolve_descriptions, typecheck
from orchestra.dsl.descriptions import OperationSig
from orchestra.graph import (
    Catalog,
    DataEdge,
    DescEntry,
    GraphMeta,
    InputNode,
    InvocationNode,
    OutputNode,
    PortEntry,
    ServiceEntry,
    WorkflowGraph,
    build_graph,
)

from iso import is_isomorphic


# --- random invocation graphs (graph-level, bypassing the DSL) ---

def random_invocation_graph(rng: random.Random, max_nodes: int = 8, max_services: int = 3) -> WorkflowGraph:
    """A random DAG of invocation nodes with random service assignment.

    Single-parameter operations with enough parameter slots for the
    random wiring; one workflow input feeding every root, one output fed
    by one sink node.
    """
    n = rng.randint(1, max_nodes)
    universe = [f"Service{i}" for i in range(1, rng.randint(1, max_services) + 1)]
    assignment = [rng.choice(universe) for _ in range(n)]
    services = [s for s in universe if s in set(assignment)]
    edges: list[tuple[int, int]] = []
    for j in range(1, n):
        for i in range(j):
            if rng.random() < 0.35:
                edges.append((i, j))

    nodes: list = []
    id_of: dict[int, str] = {}
    indeg = {j: sum(1 for (i, k) in edges if k == j) for j in range(n)}
    for j in range(n):
        arity = max(1, indeg[j])
        params = tuple((f"par{i+1}", TypeTag.INT) for i in range(arity))
        svc = assignment[j]
        svc_ix = services.index(svc) + 1
        nid = f"p{j}.Op{j}#0"
        id_of[j] = nid
        nodes.append(
            InvocationNode(
                id=nid,
                port_id=f"p{j}",
                port_name=f"Port{svc_ix}",
                service_id=f"s{svc_ix}",
                service_name=svc,
                description_id=f"d{svc_ix}",
                operation=OperationSig(f"Op{j}", params, TypeTag.INT),
                occurrence=0,
            )
        )

    data_edges = []
    used_param: dict[int, int] = {j: 0 for j in range(n)}
    for (i, j) in edges:
        arity = max(1, indeg[j])
        param = f"par{used_param[j] + 1}" if arity > 1 else None
        used_param[j] += 1
        data_edges.append(DataEdge(src=id_of[i], dst=id_of[j], param=param, tag=TypeTag.INT))

    nodes.append(InputNode(id="in:a", name="a", tag=TypeTag.INT))
    for j in range(n):
        if indeg[j] == 0:
            data_edges.append(DataEdge(src="in:a", dst=id_of[j], param=None, tag=TypeTag.INT))
    sinks = [j for j in range(n) if not any(i == j for (i, _k) in edges)]
    nodes.append(OutputNode(id="out:x", name="x", tag=TypeTag.INT))
    data_edges.append(DataEdge(src=id_of[sinks[-1]], dst="out:x", param=None, tag=TypeTag.INT))

    catalog = Catalog(
        descriptions=tuple(DescEntry(f"d{i + 1}", f"mem://d{i + 1}") for i in range(len(services))),
        services=tuple(
            ServiceEntry(f"s{i + 1}", f"d{i + 1}", services[i]) for i in range(len(services))
        ),
        ports=tuple(
            PortEntry(
                f"p{j}",
                f"s{services.index(assignment[j]) + 1}",
                f"Port{services.index(assignment[j]) + 1}",
            )
            for j in range(n)
        ),
    )
    meta = GraphMeta(name="rand", uid=None, origin="<random>", catalog=catalog)
    return WorkflowGraph(nodes, data_edges, meta)


def resolver_for_graph(g: WorkflowGraph) -> InMemoryResolver:
    """Description documents matching a synthetic graph's catalog."""
    by_desc: dict[str, dict] = {}
    svc_by_desc = {s.description_id: s for s in g.meta.catalog.services}
    for node in g.invocation_nodes():
        svc = svc_by_desc[node.description_id]
        doc = by_desc.setdefault(node.description_id, {
            "service": svc.service_name, "ports": {},
        })
        ops = doc["ports"].setdefault(node.port_name, {})
        ops[node.operation.name] = {
            "name": node.operation.name,
            "params": [{"name": p, "type": t.value} for p, t in node.operation.params],
            "returns": node.operation.returns.value,
        }
    resolver = InMemoryResolver()
    for entry in g.meta.catalog.descriptions:
        doc = by_desc.get(entry.id)
        if doc is None:
            continue
        resolver.register(entry.url, {
            "service": doc["service"],
            "ports": [
                {"name": port_name, "operations": sorted(ops.values(), key=lambda o: o["name"])}
                for port_name, ops in sorted(doc["ports"].items())
            ],
        })
    return resolver


# --- brute-force finest partition under the same-service-chain rule ---

def _set_partitions(items: list):
    """All partitions of a list (Bell-number enumeration)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in _set_partitions(rest):
        for i in range(len(partial)):
            yield partial[:i] + [[first] + partial[i]] + partial[i + 1:]
        yield [[first]] + partial


def finest_partition_oracle(g: WorkflowGraph) -> set[frozenset[str]]:
    """Finest valid partition of invocation nodes, found by exhaustive search.

    A partition is valid when (a) any two invocations of the same service
    joined by a direct data dependency share a block, (b) every block is
    service-pure, and (c) every block is weakly connected through its
    internal direct edges.
    """
    invocations = {n.id: n for n in g.invocation_nodes()}
    ids = sorted(invocations)
    forced = [
        (e.src, e.dst)
        for e in g.edges
        if e.src in invocations and e.dst in invocations
        and invocations[e.src].service_name == invocations[e.dst].service_name
    ]

    def valid(blocks: list[list[str]]) -> bool:
        where = {nid: i for i, block in enumerate(blocks) for nid in block}
        for a, b in forced:
            if where[a] != where[b]:
                return False
        for block in blocks:
            if len({invocations[nid].service_name for nid in block}) > 1:
                return False
            if len(block) > 1:
                block_set = set(block)
                adj = {nid: set() for nid in block}
                for e in g.edges:
                    if e.src in block_set and e.dst in block_set:
                        adj[e.src].add(e.dst)
                        adj[e.dst].add(e.src)
                seen = {block[0]}
                frontier = [block[0]]
                while frontier:
                    x = frontier.pop()
                    for y in adj[x]:
                        if y not in seen:
                            seen.add(y)
                            frontier.append(y)
                if len(seen) != len(block):
                    return False
        return True

    best: list[list[str]] | None = None
    for partition in _set_partitions(ids):
        if valid(partition) and (best is None or len(partition) > len(best)):
            best = partition
    assert best is not None
    return {frozenset(block) for block in best}


# --- structural equivalence of encoded workflow texts ---

def compile_full(text_or_src, resolver):
    src = text_or_src if isinstance(text_or_src, SourceUnit) else SourceUnit(text_or_src)
    ast = parse(src)
    docs = resolve_descriptions(ast, resolver)
    typed = typecheck(ast, docs)
    return ast, typed, build_graph(typed)


def forward_signature(ast, typed, g) -> set[tuple]:
    """Forwards as (producing operation label | input name, destination URL)."""
    engine_urls = {e.id: e.url for e in ast.engine_decls}
    sig = set()
    for fwd in ast.forward_stmts:
        producer = typed.var_producers.get(fwd.variable)
        if producer is None or producer[0] == "input":
            label = ("input", fwd.variable)
        else:
            info = typed.invocations[producer[1]]
            label = ("op", info.service.service_name, info.operation.name)
        sig.add((label, engine_urls[fwd.engine_id]))
    return sig


def assert_structurally_equivalent(text_a, text_b, resolver) -> None:
    """Decl-set, flow-set, and forward-set equality modulo identifier names."""
    ast_a, typed_a, g_a = compile_full(text_a, resolver)
    ast_b, typed_b, g_b = compile_full(text_b, resolver)
    assert {d.url for d in ast_a.description_decls} == {d.url for d in ast_b.description_decls}
    assert {s.service_name for s in ast_a.service_decls} == {s.service_name for s in ast_b.service_decls}
    assert {p.port_name for p in ast_a.port_decls} == {p.port_name for p in ast_b.port_decls}
    assert sorted(v.tag.value for v in ast_a.inputs) == sorted(v.tag.value for v in ast_b.inputs)
    assert sorted(v.tag.value for v in ast_a.outputs) == sorted(v.tag.value for v in ast_b.outputs)
    assert forward_signature(ast_a, typed_a, g_a) == forward_signature(ast_b, typed_b, g_b)
    assert is_isomorphic(_strip_boundary_names(g_a), _strip_boundary_names(g_b))


def _strip_boundary_names(g: WorkflowGraph) -> WorkflowGraph:
    """Anonymize input/output names so renamed boundaries still compare equal."""
    order = sorted(g.nodes)
    renamed = []
    mapping = {}
    for nid in order:
        node = g.nodes[nid]
        if isinstance(node, InputNode):
            mapping[nid] = nid
            renamed.append(InputNode(id=nid, name="_", tag=node.tag))
        elif isinstance(node, OutputNode):
            mapping[nid] = nid
            renamed.append(OutputNode(id=nid, name="_", tag=node.tag))
        else:
            mapping[nid] = nid
            renamed.append(node)
    edges = [DataEdge(mapping[e.src], mapping[e.dst], e.param, e.tag) for e in g.edges]
    return WorkflowGraph(renamed, edges, g.meta, value_hints=g.value_hints)


# --- merging composites back into one graph ---

def merge_composites(texts: list, resolver) -> WorkflowGraph:
    """Splice composite graphs together by matching inputs to outputs.

    Drops forwards, connects every composite input to the composite
    output of the same name, and keeps as workflow outputs those values
    no other composite consumes. The result should be isomorphic to the
    graph the composites were partitioned from.
    """
    compiled = [compile_full(t, resolver) for t in texts]
    producers: dict[str, tuple[int, str]] = {}   # value name -> (composite ix, node id)
    consumed: set[str] = set()
    for ix, (_ast, _typed, g) in enumerate(compiled):
        for out in g.output_nodes():
            (edge,) = g.in_edges(out.id)
            src_node = g.nodes[edge.src]
            if isinstance(src_node, InputNode):
                producers[out.name] = (ix, f"@in:{src_node.name}")
            else:
                producers[out.name] = (ix, edge.src)
        for inp in g.input_nodes():
            consumed.add(inp.name)

    def producer_global(name: str) -> str:
        if name not in producers:
            return f"in:{name}"  # a workflow-level input
        pix, pid = producers[name]
        if pid.startswith("@in:"):
            return producer_global(pid[4:])  # passthrough chain
        return f"c{pix}:{pid}"

    nodes: list = []
    edges: list[DataEdge] = []
    for ix, (_ast, _typed, g) in enumerate(compiled):
        for node in g.invocation_nodes():
            nodes.append(
                InvocationNode(
                    id=f"c{ix}:{node.id}",
                    port_id=node.port_id,
                    port_name=node.port_name,
                    service_id=node.service_id,
                    service_name=node.service_name,
                    description_id=node.description_id,
                    operation=node.operation,
                    occurrence=node.occurrence,
                )
            )
        for e in g.edges:
            src_node, dst_node = g.nodes[e.src], g.nodes[e.dst]
            if isinstance(dst_node, OutputNode):
                continue  # boundary handled via producers/consumers
            if isinstance(src_node, InputNode):
                src = producer_global(src_node.name)
            else:
                src = f"c{ix}:{e.src}"
            edges.append(DataEdge(src=src, dst=f"c{ix}:{e.dst}", param=e.param, tag=e.tag))

    seen_inputs = set()
    for _ast, _typed, g in compiled:
        for inp in g.input_nodes():
            root = inp.name
            if root not in producers and root not in seen_inputs:
                nodes.append(InputNode(id=f"in:{root}", name=root, tag=inp.tag))
                seen_inputs.add(root)
    for name in sorted(producers):
        if name not in consumed:
            pix, _pid = producers[name]
            src_graph = compiled[pix][2]
            out_node = next(o for o in src_graph.output_nodes() if o.name == name)
            src = producer_global(name)
            if src.startswith("in:") and src[3:] not in seen_inputs:
                in_tag = out_node.tag
                nodes.append(InputNode(id=src, name=src[3:], tag=in_tag))
                seen_inputs.add(src[3:])
            nodes.append(OutputNode(id=f"out:{name}", name=name, tag=out_node.tag))
            edges.append(DataEdge(src=src, dst=f"out:{name}", param=None, tag=out_node.tag))

    meta = compiled[0][2].meta
    return WorkflowGraph(nodes, edges, meta)
