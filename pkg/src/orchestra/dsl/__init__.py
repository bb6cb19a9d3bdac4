"""Workflow language front end: lexing, parsing, analysis, re-encoding."""

from .ast import TypeTag, WorkflowAst, unify
from .descriptions import (
    DescriptionResolver,
    FileResolver,
    InMemoryResolver,
    OperationSig,
    PortDesc,
    ServiceDescriptionDoc,
    parse_description,
    resolve_descriptions,
)
from .encoder import encode
from .lexer import KEYWORDS, Token, TokenKind, tokenize
from .parser import parse
from .source import SourceUnit
from .typecheck import TypedWorkflow, typecheck

__all__ = [
    "KEYWORDS",
    "DescriptionResolver",
    "FileResolver",
    "InMemoryResolver",
    "OperationSig",
    "PortDesc",
    "ServiceDescriptionDoc",
    "SourceUnit",
    "Token",
    "TokenKind",
    "TypeTag",
    "TypedWorkflow",
    "WorkflowAst",
    "encode",
    "parse",
    "parse_description",
    "resolve_descriptions",
    "tokenize",
    "typecheck",
    "unify",
]
