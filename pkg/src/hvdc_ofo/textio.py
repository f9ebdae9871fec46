"""
Sectioned text format shared by topology and scenario files.

::

    # comment
    [kind name]
    key = value
    1.0, 7, 900          # bare rows are kept in order

Section headers carry a kind and an optional name. Values are parsed on
demand so that errors point at the offending line and column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    def __init__(self, path, line: int, col: int, message: str):
        self.path, self.line, self.col = str(path), line, col
        super().__init__(f"{path}:{line}:{col}: {message}")


@dataclass
class Entry:
    value: str
    line: int
    col: int


@dataclass
class Section:
    kind: str
    name: str
    line: int
    path: str
    entries: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)   # (tokens, line, col)

    def error(self, key: str | None, message: str) -> ParseError:
        if key is not None and key in self.entries:
            e = self.entries[key]
            return ParseError(self.path, e.line, e.col, message)
        return ParseError(self.path, self.line, 1, message)

    def has(self, key: str) -> bool:
        return key in self.entries

    def text(self, key: str, default: str | None = None) -> str:
        if key not in self.entries:
            if default is None:
                raise self.error(None, f"[{self.kind}] section is missing '{key}'")
            return default
        return self.entries[key].value

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.entries:
            if default is None:
                raise self.error(None, f"[{self.kind}] section is missing '{key}'")
            return float(default)
        try:
            return float(self.entries[key].value)
        except ValueError:
            raise self.error(key, f"'{key}' expects a number, got {self.entries[key].value!r}") from None

    def vector(self, key: str, size: int | None = None) -> np.ndarray:
        raw = self.text(key)
        try:
            vec = np.array([float(tok) for tok in raw.replace(";", ",").split(",") if tok.strip()])
        except ValueError:
            raise self.error(key, f"'{key}' expects comma-separated numbers") from None
        if size is not None and vec.size == 1 and size > 1:
            vec = np.full(size, vec[0])
        if size is not None and vec.size != size:
            raise self.error(key, f"'{key}' expects {size} values, got {vec.size}")
        return vec

    def matrix(self, key: str, n: int) -> np.ndarray:
        """Rows separated by ``;``, entries by ``,``."""
        raw = self.text(key)
        try:
            rows = [[float(t) for t in r.split(",") if t.strip()] for r in raw.split(";") if r.strip()]
            M = np.array(rows, dtype=float)
        except ValueError:
            raise self.error(key, f"'{key}' expects a matrix 'a, b; c, d'") from None
        if M.ndim != 2 or M.shape[1] != n:
            raise self.error(key, f"'{key}' expects rows of {n} values")
        return M

    def check_keys(self, allowed):
        for k, e in self.entries.items():
            if k not in allowed:
                raise ParseError(self.path, e.line, e.col, f"unknown key '{k}' in [{self.kind}] section")


def parse_text(text: str, path="<string>") -> list:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError(path, lineno, col + len(stripped) - 1, "section header must end with ']'")
            parts = stripped[1:-1].split()
            if not parts or len(parts) > 2:
                raise ParseError(path, lineno, col, "section header is '[kind]' or '[kind name]'")
            current = Section(parts[0].lower(), parts[1] if len(parts) == 2 else "", lineno, str(path))
            sections.append(current)
            continue
        if current is None:
            raise ParseError(path, lineno, col, "content before the first section header")
        if "=" in stripped:
            key, value = stripped.split("=", 1)
            key = key.strip().lower()
            if not key or " " in key:
                raise ParseError(path, lineno, col, f"malformed key {key!r}")
            if key in current.entries:
                raise ParseError(path, lineno, col, f"duplicate key '{key}'")
            vcol = line.index("=") + 2 + (len(value) - len(value.lstrip()))
            current.entries[key] = Entry(value.strip(), lineno, vcol)
        else:
            current.rows.append(([t.strip() for t in stripped.split(",")], lineno, col))
    return sections


def parse_file(path) -> list:
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ParseError(path, 0, 0, f"file not found: {path}") from None
    except OSError as exc:
        raise ParseError(path, 0, 0, f"cannot read {path}: {exc}") from None
    return parse_text(text, path)
