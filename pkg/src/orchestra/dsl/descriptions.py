"""Service-description documents and URL resolvers.

A description document is structured JSON naming one service, its ports,
and for each port the operations with ordered, typed parameters:

    { "service": str,
      "ports": [ { "name": str,
                   "operations": [ { "name": str,
                                     "params": [{"name": str, "type": str}],
                                     "returns": str } ] } ] }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

from ..errors import FetchError, FormatError
from .ast import TypeTag, WorkflowAst

_TAGS = {t.value: t for t in TypeTag}


@dataclass(frozen=True)
class OperationSig:
    name: str
    params: tuple[tuple[str, TypeTag], ...]
    returns: TypeTag

    @property
    def arity(self) -> int:
        return len(self.params)

    def param_tag(self, name: str) -> Optional[TypeTag]:
        for pname, tag in self.params:
            if pname == name:
                return tag
        return None


@dataclass(frozen=True)
class PortDesc:
    name: str
    operations: tuple[OperationSig, ...]

    def operation(self, name: str) -> Optional[OperationSig]:
        return next((op for op in self.operations if op.name == name), None)


@dataclass(frozen=True)
class ServiceDescriptionDoc:
    url: str
    service_name: str
    ports: tuple[PortDesc, ...]

    def port(self, name: str) -> Optional[PortDesc]:
        return next((p for p in self.ports if p.name == name), None)


def _tag(raw: object, where: str) -> TypeTag:
    if not isinstance(raw, str) or raw not in _TAGS:
        raise FormatError(f"{where}: unknown type tag {raw!r}")
    return _TAGS[raw]


def parse_description(url: str, data: object) -> ServiceDescriptionDoc:
    """Validate raw JSON data against the description schema."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{url}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or not isinstance(data.get("service"), str):
        raise FormatError(f"{url}: document must be an object with a 'service' name")
    raw_ports = data.get("ports")
    if not isinstance(raw_ports, list) or not raw_ports:
        raise FormatError(f"{url}: 'ports' must be a non-empty list")
    ports = []
    for rp in raw_ports:
        if not isinstance(rp, dict) or not isinstance(rp.get("name"), str):
            raise FormatError(f"{url}: each port needs a 'name'")
        ops = []
        seen_ops: set[str] = set()
        for ro in rp.get("operations", []):
            if not isinstance(ro, dict) or not isinstance(ro.get("name"), str):
                raise FormatError(f"{url}: each operation needs a 'name'")
            if ro["name"] in seen_ops:
                raise FormatError(f"{url}: duplicate operation {ro['name']!r} in port {rp['name']!r}")
            seen_ops.add(ro["name"])
            params = []
            seen_params: set[str] = set()
            for pr in ro.get("params", []):
                if not isinstance(pr, dict) or not isinstance(pr.get("name"), str):
                    raise FormatError(f"{url}: each parameter needs a 'name'")
                if pr["name"] in seen_params:
                    raise FormatError(
                        f"{url}: duplicate parameter {pr['name']!r} in operation {ro['name']!r}"
                    )
                seen_params.add(pr["name"])
                params.append((pr["name"], _tag(pr.get("type"), f"{url}:{ro['name']}")))
            ops.append(OperationSig(ro["name"], tuple(params), _tag(ro.get("returns"), f"{url}:{ro['name']}")))
        ports.append(PortDesc(rp["name"], tuple(ops)))
    return ServiceDescriptionDoc(url=url, service_name=data["service"], ports=tuple(ports))


class DescriptionResolver(Protocol):
    def resolve(self, url: str) -> ServiceDescriptionDoc: ...


class InMemoryResolver:
    """Maps URLs to pre-registered documents; the fixture-friendly resolver."""

    def __init__(self, documents: Optional[dict[str, object]] = None):
        self._docs: dict[str, ServiceDescriptionDoc] = {}
        for url, data in (documents or {}).items():
            self.register(url, data)

    def register(self, url: str, data: object) -> None:
        if isinstance(data, ServiceDescriptionDoc):
            self._docs[url] = data
        else:
            self._docs[url] = parse_description(url, data)

    def resolve(self, url: str) -> ServiceDescriptionDoc:
        try:
            return self._docs[url]
        except KeyError:
            raise FetchError(url) from None


class FileResolver:
    """Resolves any URL to ``<base_dir>/<last path segment stem>.json``."""

    def __init__(self, base_dir: str | Path):
        self.base_dir = Path(base_dir)

    def resolve(self, url: str) -> ServiceDescriptionDoc:
        stem = url.rstrip("/").rsplit("/", 1)[-1]
        if "." in stem:
            stem = stem.rsplit(".", 1)[0]
        path = self.base_dir / f"{stem}.json"
        if not path.is_file():
            raise FetchError(url, f"no such description file {path}")
        return parse_description(url, path.read_text(encoding="utf-8"))


def resolve_descriptions(ast: WorkflowAst, resolver: DescriptionResolver) -> list[ServiceDescriptionDoc]:
    """Fetch one document per description declaration, in declaration order."""
    return [resolver.resolve(decl.url) for decl in ast.description_decls]
