"""Workflow source text with a logical origin name."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceUnit:
    """A unit of workflow source text.

    ``origin`` is a logical name (file path or URL) used in diagnostics.
    Text may use LF or CRLF line endings.
    """

    text: str
    origin: str = "<source>"

    def lines(self) -> list[str]:
        return self.text.replace("\r\n", "\n").split("\n")
