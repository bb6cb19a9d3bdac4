"""Recursive-descent parser producing a WorkflowAst.

The grammar is line-oriented: one statement per line. Declaration
cross-references are resolved during the parse, so an AST that comes out
of ``parse`` never mentions an undeclared identifier.
"""

from __future__ import annotations

from ..errors import ParseError, ResolveError
from .ast import (
    DescriptionDecl,
    EngineDecl,
    FlowEndpoint,
    FlowStmt,
    ForwardStmt,
    InvocationRef,
    Pos,
    PortDecl,
    ServiceDecl,
    TypeTag,
    VarDecl,
    VarRef,
    WorkflowAst,
)
from .lexer import KEYWORDS, Token, TokenKind, tokenize
from .source import SourceUnit

_TYPE_KEYWORDS = {"int": TypeTag.INT, "string": TypeTag.STRING, "any": TypeTag.ANY}


class _Parser:
    def __init__(self, src: SourceUnit):
        self.src = src
        self.tokens = tokenize(src)
        self.i = 0

        self.name: str | None = None
        self.uid: str | None = None
        self.engines: list[EngineDecl] = []
        self.descriptions: list[DescriptionDecl] = []
        self.services: list[ServiceDecl] = []
        self.ports: list[PortDecl] = []
        self.inputs: list[VarDecl] = []
        self.outputs: list[VarDecl] = []
        self.flows: list[FlowStmt] = []
        self.forwards: list[ForwardStmt] = []
        # variables usable as a flow source: inputs plus bound intermediates
        self.readable_vars: set[str] = set()
        self.bound_vars: set[str] = set()
        self.block: str | None = None  # open input:/output: block, if any

    # --- token helpers ---

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind is not TokenKind.EOF:
            self.i += 1
        return tok

    def fail(self, message: str, tok: Token, expected=()) -> ParseError:
        return ParseError(message, tok.line, tok.column, self.src.origin, expected)

    def expect(self, kind: TokenKind, what: str) -> Token:
        tok = self.advance()
        if tok.kind is not kind:
            raise self.fail(f"expected {what}, found {tok.text or tok.kind.value!r}", tok, (what,))
        return tok

    def expect_word(self, text: str) -> Token:
        tok = self.advance()
        if tok.kind is not TokenKind.WORD or tok.text != text:
            raise self.fail(f"expected {text!r}, found {tok.text or tok.kind.value!r}", tok, (text,))
        return tok

    def expect_identifier(self, what: str = "identifier") -> Token:
        tok = self.advance()
        if tok.kind is not TokenKind.WORD:
            raise self.fail(f"expected {what}, found {tok.text or tok.kind.value!r}", tok, (what,))
        if tok.text in KEYWORDS:
            raise self.fail(f"keyword {tok.text!r} cannot be used as {what}", tok, (what,))
        return tok

    def end_line(self) -> None:
        tok = self.advance()
        if tok.kind is TokenKind.EOF:
            return
        if tok.kind is not TokenKind.NEWLINE:
            raise self.fail(f"unexpected {tok.text!r} at end of statement", tok, ("end of line",))

    # --- statements ---

    def parse(self) -> WorkflowAst:
        first = self.peek()
        if first.kind is TokenKind.EOF:
            raise self.fail("empty workflow specification", first, ("workflow",))
        self.expect_word("workflow")
        self.name = self.expect_identifier("workflow name").text
        self.end_line()
        while self.peek().kind is not TokenKind.EOF:
            self.statement()
        if not self.outputs and not self.inputs and not self.flows:
            raise self.fail("workflow has no interface or flow statements", first)
        return WorkflowAst(
            name=self.name,
            uid=self.uid,
            engine_decls=tuple(self.engines),
            description_decls=tuple(self.descriptions),
            service_decls=tuple(self.services),
            port_decls=tuple(self.ports),
            inputs=tuple(self.inputs),
            outputs=tuple(self.outputs),
            flow_stmts=tuple(self.flows),
            forward_stmts=tuple(self.forwards),
            origin=self.src.origin,
        )

    def statement(self) -> None:
        tok = self.peek()
        if tok.kind is not TokenKind.WORD:
            self.flow_statement()
            return
        word = tok.text
        if word == "workflow":
            raise self.fail("duplicate workflow header", tok)
        if word == "uid":
            self.uid_statement()
        elif word == "engine":
            self.engine_statement()
        elif word == "description":
            self.description_statement()
        elif word == "service":
            self.service_statement()
        elif word == "port":
            self.port_statement()
        elif word in ("input", "output"):
            self.io_header()
        elif word in _TYPE_KEYWORDS:
            self.var_decl_line()
        elif word == "forward":
            self.forward_statement()
        elif word in ("to", "is"):
            raise self.fail(f"statement cannot start with keyword {word!r}", tok)
        else:
            self.flow_statement()

    def uid_statement(self) -> None:
        self.advance()
        if self.uid is not None:
            raise self.fail("duplicate uid statement", self.peek())
        parts = [self.expect(TokenKind.WORD, "uid value").text]
        while self.peek().kind is TokenKind.DOT:
            self.advance()
            parts.append(self.expect(TokenKind.WORD, "uid segment").text)
        self.uid = ".".join(parts)
        self.end_line()
        self.block = None

    def engine_statement(self) -> None:
        self.advance()
        ident = self.expect_identifier("engine identifier")
        self.check_fresh(ident)
        self.expect_word("is")
        url = self.expect(TokenKind.URL, "engine URL")
        self.engines.append(EngineDecl(ident.text, url.text, Pos(ident.line, ident.column)))
        self.end_line()
        self.block = None

    def description_statement(self) -> None:
        self.advance()
        ident = self.expect_identifier("description identifier")
        self.check_fresh(ident)
        self.expect_word("is")
        url = self.expect(TokenKind.URL, "description URL")
        self.descriptions.append(DescriptionDecl(ident.text, url.text, Pos(ident.line, ident.column)))
        self.end_line()
        self.block = None

    def service_statement(self) -> None:
        self.advance()
        ident = self.expect_identifier("service identifier")
        self.check_fresh(ident)
        self.expect_word("is")
        desc = self.expect_identifier("description identifier")
        if not any(d.id == desc.text for d in self.descriptions):
            raise ResolveError(
                f"undeclared description {desc.text!r}", desc.line, desc.column, self.src.origin
            )
        self.expect(TokenKind.DOT, "'.'")
        service_name = self.expect_identifier("service name")
        self.services.append(
            ServiceDecl(ident.text, desc.text, service_name.text, Pos(ident.line, ident.column))
        )
        self.end_line()
        self.block = None

    def port_statement(self) -> None:
        self.advance()
        ident = self.expect_identifier("port identifier")
        self.check_fresh(ident)
        self.expect_word("is")
        svc = self.expect_identifier("service identifier")
        if not any(s.id == svc.text for s in self.services):
            raise ResolveError(
                f"undeclared service {svc.text!r}", svc.line, svc.column, self.src.origin
            )
        self.expect(TokenKind.DOT, "'.'")
        port_name = self.expect_identifier("port name")
        self.ports.append(
            PortDecl(ident.text, svc.text, port_name.text, Pos(ident.line, ident.column))
        )
        self.end_line()
        self.block = None

    def io_header(self) -> None:
        tok = self.advance()
        self.expect(TokenKind.COLON, "':'")
        self.end_line()
        self.block = tok.text

    def var_decl_line(self) -> None:
        tok = self.advance()
        if self.block not in ("input", "output"):
            raise self.fail("typed declaration outside an input:/output: block", tok)
        tag = _TYPE_KEYWORDS[tok.text]
        names = [self.expect_identifier("variable name")]
        while self.peek().kind is TokenKind.COMMA:
            self.advance()
            names.append(self.expect_identifier("variable name"))
        self.end_line()
        for name_tok in names:
            decl = VarDecl(name_tok.text, tag, Pos(name_tok.line, name_tok.column))
            if any(v.name == decl.name for v in self.inputs + self.outputs):
                raise ResolveError(
                    f"duplicate variable declaration {decl.name!r}",
                    name_tok.line, name_tok.column, self.src.origin,
                )
            if self.block == "input":
                self.inputs.append(decl)
                self.readable_vars.add(decl.name)
            else:
                self.outputs.append(decl)

    def forward_statement(self) -> None:
        tok = self.advance()
        var = self.expect_identifier("variable name")
        if var.text not in self.bound_vars and not any(v.name == var.text for v in self.outputs):
            raise ResolveError(
                f"forward of unbound variable {var.text!r}", var.line, var.column, self.src.origin
            )
        self.expect_word("to")
        eng = self.expect_identifier("engine identifier")
        if not any(e.id == eng.text for e in self.engines):
            raise ResolveError(
                f"undeclared engine {eng.text!r}", eng.line, eng.column, self.src.origin
            )
        self.forwards.append(ForwardStmt(var.text, eng.text, Pos(tok.line, tok.column)))
        self.end_line()
        self.block = None

    def flow_statement(self) -> None:
        start = self.peek()
        source = self.flow_endpoint(is_source=True)
        self.expect(TokenKind.ARROW, "'->'")
        targets = [self.flow_endpoint(is_source=False)]
        while self.peek().kind is TokenKind.COMMA:
            self.advance()
            targets.append(self.flow_endpoint(is_source=False))
        self.end_line()
        self.flows.append(FlowStmt(source, tuple(targets), Pos(start.line, start.column)))
        self.block = None

    def flow_endpoint(self, is_source: bool) -> FlowEndpoint:
        tok = self.expect_identifier("flow endpoint")
        if self.peek().kind is not TokenKind.DOT:
            # plain variable endpoint
            if is_source:
                if tok.text not in self.readable_vars:
                    raise ResolveError(
                        f"variable {tok.text!r} is not a declared input or previously "
                        f"bound intermediate",
                        tok.line, tok.column, self.src.origin,
                    )
            else:
                if any(v.name == tok.text for v in self.inputs):
                    raise ResolveError(
                        f"workflow input {tok.text!r} cannot be a flow target",
                        tok.line, tok.column, self.src.origin,
                    )
                # once bound, intermediates and outputs are both readable
                self.bound_vars.add(tok.text)
                self.readable_vars.add(tok.text)
            return VarRef(tok.text, Pos(tok.line, tok.column))
        # invocation endpoint: port.Op or port.Op.par
        if not any(p.id == tok.text for p in self.ports):
            raise ResolveError(
                f"undeclared port {tok.text!r}", tok.line, tok.column, self.src.origin
            )
        self.advance()
        op = self.expect_identifier("operation name")
        param = None
        if self.peek().kind is TokenKind.DOT:
            self.advance()
            par = self.expect_identifier("parameter name")
            if is_source:
                raise self.fail("parameter suffix is only valid on a flow target", par)
            param = par.text
        return InvocationRef(tok.text, op.text, param, Pos(tok.line, tok.column))

    def check_fresh(self, ident: Token) -> None:
        taken = (
            [e.id for e in self.engines]
            + [d.id for d in self.descriptions]
            + [s.id for s in self.services]
            + [p.id for p in self.ports]
        )
        if ident.text in taken:
            raise ResolveError(
                f"duplicate declaration of {ident.text!r}", ident.line, ident.column, self.src.origin
            )


def parse(src: SourceUnit) -> WorkflowAst:
    """Parse workflow source into an AST, resolving declaration references."""
    return _Parser(src).parse()
