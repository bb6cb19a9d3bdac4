"""Deterministic generation of dataflow-pattern workflows.

Patterns: a pipeline chains services; a distribution fans one root's
result out to the remaining services; an aggregation feeds one sink
operation's parameters from the others; the end-to-end shape combines
the three (chain, then a two-way fan-out, then a fan-in).
"""

from __future__ import annotations

from ..dsl import InMemoryResolver, SourceUnit
from ..errors import ConfigError

PATTERNS = ("pipeline", "distribution", "aggregation", "end_to_end")

DESCRIPTION_URL = "mem://services/service{i}.json"


def _header(name: str, count: int) -> list[str]:
    lines = [f"workflow {name}"]
    for i in range(1, count + 1):
        lines.append(f"description d{i} is {DESCRIPTION_URL.format(i=i)}")
    for i in range(1, count + 1):
        lines.append(f"service s{i} is d{i}.Service{i}")
    for i in range(1, count + 1):
        lines.append(f"port p{i} is s{i}.Port{i}")
    return lines


def generate_workflow(pattern: str, service_count: int) -> SourceUnit:
    """Emit workflow source for one pattern over ``service_count`` services."""
    n = service_count
    if pattern not in PATTERNS:
        raise ConfigError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")
    if n < 2:
        raise ConfigError(f"pattern {pattern!r} needs at least 2 services, got {n}")
    if pattern == "end_to_end" and n < 4:
        raise ConfigError(f"end_to_end needs at least 4 services, got {n}")

    lines = _header(f"{pattern}{n}", n)
    if pattern == "pipeline":
        lines += ["input:", "   int a", "output:", "   int x", "a -> p1.Op1"]
        for i in range(1, n):
            lines.append(f"p{i}.Op{i} -> p{i + 1}.Op{i + 1}")
        lines.append(f"p{n}.Op{n} -> x")
    elif pattern == "distribution":
        outs = [f"x{k}" for k in range(2, n + 1)]
        lines += ["input:", "   int a", "output:", "   int " + ", ".join(outs)]
        lines.append("a -> p1.Op1")
        lines.append("p1.Op1 -> " + ", ".join(f"p{k}.Op{k}" for k in range(2, n + 1)))
        for k in range(2, n + 1):
            lines.append(f"p{k}.Op{k} -> x{k}")
    elif pattern == "aggregation":
        lines += ["input:", "   int a", "output:", "   int x"]
        feeders = list(range(1, n))
        lines.append("a -> " + ", ".join(f"p{k}.Op{k}" for k in feeders))
        for k in feeders:
            suffix = f".par{k}" if len(feeders) > 1 else ""
            lines.append(f"p{k}.Op{k} -> p{n}.Op{n}{suffix}")
        lines.append(f"p{n}.Op{n} -> x")
    else:  # end_to_end: chain, two-way distribution, aggregation
        chain_len = n - 3
        lines += ["input:", "   int a", "output:", "   int x", "a -> p1.Op1"]
        for i in range(1, chain_len):
            lines.append(f"p{i}.Op{i} -> p{i + 1}.Op{i + 1}")
        lines.append(f"p{chain_len}.Op{chain_len} -> p{n - 2}.Op{n - 2}, p{n - 1}.Op{n - 1}")
        lines.append(f"p{n - 2}.Op{n - 2} -> p{n}.Op{n}.par1")
        lines.append(f"p{n - 1}.Op{n - 1} -> p{n}.Op{n}.par2")
        lines.append(f"p{n}.Op{n} -> x")
    return SourceUnit("\n".join(lines) + "\n", origin=f"{pattern}{n}.orc")


def generate_descriptions(pattern: str, service_count: int) -> dict[str, dict]:
    """Service descriptions matching generate_workflow, keyed by URL."""
    n = service_count
    docs: dict[str, dict] = {}
    for i in range(1, n + 1):
        if pattern == "aggregation" and i == n and n > 2:
            params = [{"name": f"par{k}", "type": "int"} for k in range(1, n)]
        elif pattern == "end_to_end" and i == n:
            params = [{"name": "par1", "type": "int"}, {"name": "par2", "type": "int"}]
        else:
            params = [{"name": "par1", "type": "int"}]
        docs[DESCRIPTION_URL.format(i=i)] = {
            "service": f"Service{i}",
            "ports": [
                {
                    "name": f"Port{i}",
                    "operations": [{"name": f"Op{i}", "params": params, "returns": "int"}],
                }
            ],
        }
    return docs


def pattern_resolver(pattern: str, service_count: int) -> InMemoryResolver:
    return InMemoryResolver(generate_descriptions(pattern, service_count))
