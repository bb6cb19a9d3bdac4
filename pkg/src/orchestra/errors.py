"""Exception hierarchy shared by all orchestra subsystems."""

from __future__ import annotations


class OrchestraError(Exception):
    """Base class for every error raised by this package."""


class Diagnostic(OrchestraError):
    """An error tied to a position in workflow source text.

    ``line`` and ``column`` are 1-based and always index a real token in
    the offending source unit.
    """

    def __init__(self, message: str, line: int, column: int, origin: str = "<source>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.origin = origin

    def __str__(self) -> str:
        return f"{self.origin}:{self.line}:{self.column}: {self.message}"


# --- lexing / parsing / semantic analysis ---

class LexError(Diagnostic):
    pass


class ParseError(Diagnostic):
    def __init__(self, message, line, column, origin="<source>", expected=()):
        super().__init__(message, line, column, origin)
        self.expected = tuple(expected)


class ResolveError(Diagnostic):
    """An identifier or declared name could not be resolved."""


class TypeCheckError(Diagnostic):
    """A value's type tag does not unify with the declared signature."""

    def __init__(self, message, line, column, origin="<source>", expected=None, found=None):
        super().__init__(message, line, column, origin)
        self.expected = expected
        self.found = found


class ArityError(Diagnostic):
    """An invocation's bound arguments do not cover the operation's parameters."""


class UnboundOutputError(Diagnostic):
    """A declared workflow output is never assigned a value."""


class DuplicateBindingError(Diagnostic):
    """A variable is assigned more than once."""


class EncodeError(OrchestraError):
    """A composite workflow cannot be re-encoded as standalone source."""


# --- service descriptions ---

class FetchError(OrchestraError):
    """A service-description URL could not be resolved."""

    def __init__(self, url: str, reason: str = "unresolvable URL"):
        super().__init__(f"{reason}: {url}")
        self.url = url


class FormatError(OrchestraError):
    """A service-description document is malformed."""


# --- graph ---

class CycleError(OrchestraError):
    """The workflow wiring is cyclic; ``cycle`` holds one offending node sequence."""

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle))


class UnknownNodeError(OrchestraError):
    pass


# --- qos / placement ---

class DomainError(OrchestraError):
    """A numeric argument is outside its valid domain."""


class NoEngineError(OrchestraError):
    pass


class MissingQosError(OrchestraError):
    def __init__(self, engine_id: str, service_id: str):
        super().__init__(f"no QoS sample for engine {engine_id!r} and service {service_id!r}")
        self.engine_id = engine_id
        self.service_id = service_id


class ProbeError(OrchestraError):
    pass


# --- engine runtime ---

class CompileError(OrchestraError):
    """Deployment failed while compiling the received specification."""

    def __init__(self, cause: Diagnostic):
        super().__init__(str(cause))
        self.cause = cause


class DuplicateDeploymentError(OrchestraError):
    pass


class DuplicateValueError(OrchestraError):
    pass


class TypeMismatchError(OrchestraError):
    """An arriving value's type tag conflicts with the declared input."""


class EngineStateError(OrchestraError):
    pass


class InvocationError(OrchestraError):
    """A service reported a fault while executing an operation."""


class TransportError(OrchestraError):
    pass


# --- harness ---

class UnknownRegionError(OrchestraError):
    pass


class ConfigError(OrchestraError):
    pass
