"""Service invocation ports as seen from a workflow engine."""

from __future__ import annotations

from typing import Callable, Protocol

from ..errors import InvocationError
from ..sim import EventLoop
from .values import Value

DoneFn = Callable[[Value], None]
FailFn = Callable[[Exception], None]
OperationFn = Callable[[str, dict[str, Value]], Value]


class ServicePort(Protocol):
    """Transport handle for invoking one port's named operations."""

    def request(self, operation: str, args: dict[str, Value], done: DoneFn, fail: FailFn) -> None:
        """Invoke asynchronously; exactly one of done/fail is called later."""
        ...


class ServiceDirectory(Protocol):
    """Resolves the ports an engine can reach."""

    def port_for(self, service_name: str, port_name: str) -> ServicePort: ...


def combine_operation(operation: str, args: dict[str, Value]) -> Value:
    """Default pure stub: deterministic combination of the inputs.

    Integer payloads sum (plus a stable per-operation offset), anything
    else concatenates in parameter order. Output size is the sum of the
    input sizes.
    """
    ordered = [args[k] for k in sorted(args)]
    size = sum(v.size_mb for v in ordered)
    if all(isinstance(v.payload, int) for v in ordered):
        payload: object = sum(v.payload for v in ordered) + len(operation)
    else:
        payload = operation + "(" + ",".join(str(v.payload) for v in ordered) + ")"
    return Value(payload=payload, size_mb=size)


class LocalPort:
    """Immediate in-process port; zero transfer cost, optional delay."""

    def __init__(self, env: EventLoop, fn: OperationFn = combine_operation, delay_s: float = 0.0):
        self.env = env
        self.fn = fn
        self.delay_s = delay_s

    def request(self, operation: str, args: dict[str, Value], done: DoneFn, fail: FailFn) -> None:
        def fire():
            try:
                result = self.fn(operation, args)
            except Exception as exc:  # service fault surfaces as InvocationError
                fail(InvocationError(f"operation {operation!r} failed: {exc}"))
                return
            done(result)

        self.env.schedule(self.delay_s, fire)


class LocalDirectory:
    """In-process directory mapping (service, port) to a LocalPort.

    Unregistered lookups either fail or, with ``open_world=True``, fall
    back to a default stub port (handy for debugging arbitrary specs).
    """

    def __init__(self, env: EventLoop, open_world: bool = False, delay_s: float = 0.0):
        self.env = env
        self.open_world = open_world
        self.delay_s = delay_s
        self._ports: dict[tuple[str, str], ServicePort] = {}

    def register(self, service_name: str, port_name: str, port: ServicePort) -> None:
        self._ports[(service_name, port_name)] = port

    def register_function(self, service_name: str, port_name: str,
                          fn: OperationFn = combine_operation, delay_s: float | None = None) -> None:
        delay = self.delay_s if delay_s is None else delay_s
        self.register(service_name, port_name, LocalPort(self.env, fn, delay))

    def port_for(self, service_name: str, port_name: str) -> ServicePort:
        port = self._ports.get((service_name, port_name))
        if port is None:
            if self.open_world:
                return LocalPort(self.env, combine_operation, self.delay_s)
            raise InvocationError(f"no reachable port {port_name!r} on service {service_name!r}")
        return port
