"""JSON Lines trace format, versioned and byte-stable.

The first line is a header carrying the schema version; every other line is
one event with at least "tick" and "kind". Identical configurations produce
byte-identical trace files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "send",
    "buffer",
    "execute",
    "skip",
    "fund",
    "topup",
    "defund",
    "redeem",
    "slash",
    "rollback",
    "halt",
    "check",
)


def event_line(event: dict) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"))


def dump_trace(events: Iterable[dict], header_extra: dict | None = None) -> str:
    header = {"kind": "header", "schema": SCHEMA_VERSION}
    header.update(header_extra or {})
    lines = [event_line(header)]
    lines.extend(event_line(e) for e in events)
    return "\n".join(lines) + "\n"


def write_trace(path: str | Path, events: Iterable[dict], header_extra: dict | None = None) -> None:
    Path(path).write_text(dump_trace(events, header_extra), encoding="utf-8")


def read_trace(path: str | Path) -> tuple[dict, list[dict]]:
    """Returns (header, events). Raises ValueError on schema mismatch."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError("empty trace file")
    header = json.loads(lines[0])
    if header.get("kind") != "header" or header.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported trace header: {lines[0]!r}")
    return header, [json.loads(line) for line in lines[1:] if line]
