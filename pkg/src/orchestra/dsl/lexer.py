"""Line-oriented lexer for workflow source."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from ..errors import LexError
from .source import SourceUnit

KEYWORDS = frozenset({
    "workflow", "uid", "engine", "description", "service", "port",
    "input", "output", "forward", "to", "is", "int", "string", "any",
})


class TokenKind(Enum):
    WORD = "word"
    URL = "url"
    ARROW = "->"
    COMMA = ","
    COLON = ":"
    DOT = "."
    NEWLINE = "newline"
    EOF = "eof"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    column: int

    @property
    def is_keyword(self) -> bool:
        return self.kind is TokenKind.WORD and self.text in KEYWORDS


_URL = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*://[^\s,]+")
# hyphens allowed inside words (engine ids like us-east-1) but never as part of "->"
_WORD = re.compile(r"[A-Za-z0-9_]+(?:-(?!>)[A-Za-z0-9_]+)*")
_WS = re.compile(r"[ \t]+")

_PUNCT = {
    "->": TokenKind.ARROW,
    ",": TokenKind.COMMA,
    ":": TokenKind.COLON,
    ".": TokenKind.DOT,
}


def tokenize(src: SourceUnit) -> list[Token]:
    """Split source into tokens with 1-based positions.

    Blank lines and bare ``..`` elision lines are skipped; every other
    line ends with a NEWLINE token. Raises LexError on characters that
    belong to no token.
    """
    tokens: list[Token] = []
    for lineno, line in enumerate(src.lines(), start=1):
        if line.strip() == "" or line.strip() == "..":
            continue
        pos = 0
        emitted = False
        while pos < len(line):
            ws = _WS.match(line, pos)
            if ws:
                pos = ws.end()
                continue
            m = _URL.match(line, pos)
            if m:
                tokens.append(Token(TokenKind.URL, m.group(), lineno, pos + 1))
                pos = m.end()
                emitted = True
                continue
            if line.startswith("->", pos):
                tokens.append(Token(TokenKind.ARROW, "->", lineno, pos + 1))
                pos += 2
                emitted = True
                continue
            ch = line[pos]
            if ch in _PUNCT:
                tokens.append(Token(_PUNCT[ch], ch, lineno, pos + 1))
                pos += 1
                emitted = True
                continue
            m = _WORD.match(line, pos)
            if m:
                tokens.append(Token(TokenKind.WORD, m.group(), lineno, pos + 1))
                pos = m.end()
                emitted = True
                continue
            raise LexError(f"unexpected character {ch!r}", lineno, pos + 1, src.origin)
        if emitted:
            tokens.append(Token(TokenKind.NEWLINE, "", lineno, len(line) + 1))
    last_line = len(src.lines())
    tokens.append(Token(TokenKind.EOF, "", last_line, 1))
    return tokens
