from pathlib import Path

import pytest

from orchestra.dsl import InMemoryResolver, SourceUnit, parse, resolve_descriptions, typecheck
from orchestra.graph import build_graph

FIXTURES = Path(__file__).parent / "fixtures"


def load_source(name: str) -> SourceUnit:
    path = FIXTURES / name
    return SourceUnit(path.read_text(encoding="utf-8"), origin=name)


def make_registry() -> InMemoryResolver:
    registry = InMemoryResolver()
    for path in sorted((FIXTURES / "descriptions").glob("*.json")):
        url = f"http://registry.test/documents/{path.name}"
        registry.register(url, path.read_text(encoding="utf-8"))
    return registry


def compile_source(src: SourceUnit, resolver=None):
    resolver = resolver or make_registry()
    ast = parse(src)
    docs = resolve_descriptions(ast, resolver)
    typed = typecheck(ast, docs)
    return build_graph(typed)


@pytest.fixture
def dag6_source() -> SourceUnit:
    return load_source("dag6.orc")


@pytest.fixture
def registry() -> InMemoryResolver:
    return make_registry()


@pytest.fixture
def dag6_graph(dag6_source, registry):
    return compile_source(dag6_source, registry)


def service_doc(service: str, port: str, ops: dict[str, tuple[list[tuple[str, str]], str]]) -> dict:
    """Build a description document dict: ops maps name -> (params, returns)."""
    return {
        "service": service,
        "ports": [
            {
                "name": port,
                "operations": [
                    {
                        "name": name,
                        "params": [{"name": p, "type": t} for p, t in params],
                        "returns": returns,
                    }
                    for name, (params, returns) in ops.items()
                ],
            }
        ],
    }
