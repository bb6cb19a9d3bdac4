"""Re-encoding of composite workflows back to workflow source text."""

from __future__ import annotations

from typing import TYPE_CHECKING

from ..errors import EncodeError
from .ast import TypeTag
from .source import SourceUnit

if TYPE_CHECKING:  # avoid a runtime cycle with the partitioner
    from ..partitioner import CompositeWorkflow


def _decl_block(header: str, decls: list[tuple[str, TypeTag]]) -> list[str]:
    lines = [f"{header}:"]
    group: list[str] = []
    group_tag: TypeTag | None = None
    for name, tag in decls:
        if tag is group_tag:
            group.append(name)
        else:
            if group:
                lines.append(f"   {group_tag.value} {', '.join(group)}")
            group, group_tag = [name], tag
    if group:
        lines.append(f"   {group_tag.value} {', '.join(group)}")
    return lines


def encode(composite: "CompositeWorkflow") -> SourceUnit:
    """Emit a composite as self-contained workflow source.

    Statement order: workflow, uid, engine declarations, descriptions,
    services, ports, input block, output block, flow statements in
    topological order, forward statements last.
    """
    if not composite.members and not composite.passthroughs:
        raise EncodeError("composite has no flow statements to encode")

    member_ix = {node.id: i for i, node in enumerate(composite.members)}
    nodes = {node.id: node for node in composite.members}
    out_by_producer = {o.producer: o for o in composite.outputs}

    consumers: dict[str, list] = {}
    for e in list(composite.inbound_edges) + list(composite.internal_edges):
        consumers.setdefault(e.src, []).append(e)
    for edges in consumers.values():
        edges.sort(key=lambda e: (member_ix[e.dst], e.param or ""))

    def target_text(edge) -> str:
        node = nodes[edge.dst]
        base = f"{node.port_id}.{node.operation.name}"
        return f"{base}.{edge.param}" if edge.param else base

    lines = [f"workflow {composite.name}"]
    if composite.full_uid:
        lines.append(f"uid {composite.full_uid}")
    for eid, url in composite.engine_decls:
        lines.append(f"engine {eid} is {url}")
    for d in composite.catalog.descriptions:
        lines.append(f"description {d.id} is {d.url}")
    for s in composite.catalog.services:
        lines.append(f"service {s.id} is {s.description_id}.{s.service_name}")
    for p in composite.catalog.ports:
        lines.append(f"port {p.id} is {p.service_id}.{p.port_name}")

    lines.extend(_decl_block("input", [(i.name, i.tag) for i in composite.inputs]))
    out_decls = [(o.name, o.tag) for o in composite.outputs]
    out_decls += [(pt.output_name, pt.tag) for pt in composite.passthroughs]
    lines.extend(_decl_block("output", out_decls))

    for inp in composite.inputs:
        edges = consumers.get(inp.producer, [])
        if inp.producer not in composite.names:
            raise EncodeError(f"composite input {inp.name!r} has no housed variable")
        if edges:
            lines.append(f"{inp.name} -> " + ", ".join(target_text(e) for e in edges))
    for pt in composite.passthroughs:
        lines.append(f"{pt.input_name} -> {pt.output_name}")

    for node in composite.members:
        source = f"{node.port_id}.{node.operation.name}"
        edges = consumers.get(node.id, [])
        out = out_by_producer.get(node.id)
        if out is not None:
            lines.append(f"{source} -> {out.name}")
            if edges:
                lines.append(f"{out.name} -> " + ", ".join(target_text(e) for e in edges))
        elif edges:
            lines.append(f"{source} -> " + ", ".join(target_text(e) for e in edges))

    for var, engine_id in composite.forwards:
        lines.append(f"forward {var} to {engine_id}")

    origin = f"{composite.name}.{composite.full_uid or 'composite'}.orc"
    return SourceUnit(text="\n".join(lines) + "\n", origin=origin)
