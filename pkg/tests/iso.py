"""Renaming-insensitive graph isomorphism used as a test oracle.

Node labels come from service descriptions (service/port/operation
names), not from declaration identifiers, so two graphs compare equal
irrespective of how the source text named its declarations.
"""

from __future__ import annotations

from orchestra.graph import InputNode, InvocationNode, OutputNode, WorkflowGraph


def node_label(node) -> tuple:
    if isinstance(node, InputNode):
        return ("in", node.name, node.tag.value)
    if isinstance(node, OutputNode):
        return ("out", node.name, node.tag.value)
    assert isinstance(node, InvocationNode)
    sig = tuple((p, t.value) for p, t in node.operation.params)
    return ("inv", node.service_name, node.port_name, node.operation.name, sig,
            node.operation.returns.value)


def is_isomorphic(g1: WorkflowGraph, g2: WorkflowGraph) -> bool:
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return False
    labels1 = sorted(node_label(n) for n in g1.nodes.values())
    labels2 = sorted(node_label(n) for n in g2.nodes.values())
    if labels1 != labels2:
        return False

    ids1 = sorted(g1.nodes, key=lambda n: (node_label(g1.nodes[n]), n))
    candidates = {
        nid: [m for m in g2.nodes if node_label(g2.nodes[m]) == node_label(g1.nodes[nid])]
        for nid in ids1
    }
    edges1 = {(e.src, e.dst): e.param for e in g1.edges}
    edges2 = {(e.src, e.dst): e.param for e in g2.edges}
    if len(edges1) != len(g1.edges) or len(edges2) != len(g2.edges):
        # parallel edges: fall back to multiset comparison per pair
        edges1 = {}
        for e in g1.edges:
            edges1.setdefault((e.src, e.dst), []).append(e.param)
        edges2 = {}
        for e in g2.edges:
            edges2.setdefault((e.src, e.dst), []).append(e.param)
        for v in edges1.values():
            v.sort(key=lambda p: p or "")
        for v in edges2.values():
            v.sort(key=lambda p: p or "")

    mapping: dict[str, str] = {}
    used: set[str] = set()

    def consistent(a: str, b: str) -> bool:
        for other1, other2 in mapping.items():
            for pair1, pair2 in (((a, other1), (b, other2)), ((other1, a), (other2, b))):
                e1 = edges1.get(pair1)
                e2 = edges2.get(pair2)
                if (pair1 in edges1) != (pair2 in edges2):
                    return False
                if pair1 in edges1 and e1 != e2:
                    return False
        return True

    def backtrack(i: int) -> bool:
        if i == len(ids1):
            return True
        a = ids1[i]
        for b in candidates[a]:
            if b in used:
                continue
            if len(g1.in_edges(a)) != len(g2.in_edges(b)):
                continue
            if len(g1.out_edges(a)) != len(g2.out_edges(b)):
                continue
            if not consistent(a, b):
                continue
            mapping[a] = b
            used.add(b)
            if backtrack(i + 1):
                return True
            del mapping[a]
            used.remove(b)
        return False

    return backtrack(0)
