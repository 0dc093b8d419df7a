"""Chain file format.

A chain file is a JSON document, either explicit::

    {
      "states": ["a", "b"],
      "rows": {
        "a": {"a": "0.5", "b": "0.5"},
        "b": {"a": "0.2", "b": "0.8"}
      }
    }

with probabilities as decimal strings, or a gallery reference::

    {"gallery": "two-state", "params": ["0.5", "0.2"]}

Row sums are checked in exact decimal arithmetic before conversion to floats.
"""

from __future__ import annotations

import json
import re
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .chain import ROW_TOL, ChainError, FiniteChain
from .gallery import build

__all__ = ["ChainFileError", "loads", "load", "dumps"]


class ChainFileError(ChainError):
    def __init__(self, message: str, line: int = 1):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _row_line(text: str, label) -> int:
    lines = text.splitlines()
    start = next((i for i, ln in enumerate(lines) if '"rows"' in ln), 0)
    pat = re.compile(r'"%s"\s*:\s*\{' % re.escape(str(label)))
    for i in range(start, len(lines)):
        if pat.search(lines[i]):
            return i + 1
    return start + 1


def _decimal(text: str, value, label) -> Decimal:
    if not isinstance(value, str):
        raise ChainFileError(
            f"probability in row {label!r} must be a decimal string, got {value!r}",
            _row_line(text, label),
        )
    try:
        d = Decimal(value)
    except InvalidOperation:
        raise ChainFileError(f"bad probability {value!r} in row {label!r}",
                             _row_line(text, label)) from None
    if not d.is_finite() or d < 0:
        raise ChainFileError(f"bad probability {value!r} in row {label!r}",
                             _row_line(text, label))
    return d


def loads(text: str):
    """Parse a chain document; returns a FiniteChain or a gallery chain."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainFileError(exc.msg, exc.lineno) from None
    if not isinstance(doc, dict):
        raise ChainFileError("top level must be an object")
    if "gallery" in doc:
        params = doc.get("params", [])
        try:
            values = [float(Decimal(str(p))) for p in params]
        except InvalidOperation:
            raise ChainFileError(f"bad gallery parameters {params!r}") from None
        try:
            return build(doc["gallery"], *values)
        except ChainError as exc:
            raise ChainFileError(str(exc)) from None
    if "states" not in doc or "rows" not in doc:
        raise ChainFileError('expected "states" and "rows" (or "gallery")')
    states = doc["states"]
    rows = doc["rows"]
    if not isinstance(states, list) or not isinstance(rows, dict):
        raise ChainFileError('"states" must be an array and "rows" an object')
    known = set(states)
    if len(known) != len(states):
        raise ChainFileError("duplicate state labels")
    parsed = {}
    for label in states:
        if label not in rows:
            raise ChainFileError(f"missing row for state {label!r}", _row_line(text, "rows"))
    for label, row in rows.items():
        line = _row_line(text, label)
        if label not in known:
            raise ChainFileError(f"row for unknown state {label!r}", line)
        if not isinstance(row, dict):
            raise ChainFileError(f"row {label!r} must be an object", line)
        probs = {}
        for target, value in row.items():
            if target not in known:
                raise ChainFileError(f"row {label!r} references unknown state {target!r}", line)
            probs[target] = _decimal(text, value, label)
        total = sum(probs.values(), Decimal(0))
        if abs(total - 1) > Decimal(repr(ROW_TOL)):
            raise ChainFileError(f"row {label!r} sums to {total}, not 1", line)
        parsed[label] = {t: float(p) for t, p in probs.items()}
    try:
        return FiniteChain.from_rows(states, parsed)
    except ChainError as exc:
        raise ChainFileError(str(exc)) from None


def load(path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ChainError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def dumps(chain: FiniteChain) -> str:
    """Serialise with shortest round-trip decimal strings."""
    states = [str(s) for s in chain.states]
    if len(set(states)) != len(states):
        raise ChainError("state labels collide when converted to strings")
    rows = {
        str(s): {str(t): repr(p) for t, p in row.items()}
        for s, row in chain.rows.items()
    }
    return json.dumps({"states": states, "rows": rows}, indent=2) + "\n"
