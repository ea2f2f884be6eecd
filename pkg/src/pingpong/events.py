"""Deterministic event log shared by ledgers, channels and sessions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterator


@dataclass(frozen=True)
class EventRecord:
    tick: int
    module: str
    kind: str
    payload: dict[str, Any] = field(default_factory=dict)

    def __deepcopy__(self, memo):
        return self

    def to_json(self) -> str:
        # Field order is part of the log format: tick, module, kind, payload keys.
        row = {"tick": self.tick, "module": self.module, "kind": self.kind}
        row.update(self.payload)
        return json.dumps(row, separators=(",", ":"))


class EventLog:
    """Append-only list of records stamped with the current simulation tick.

    The owner of the clock (a session or a test) updates ``tick``; emitters
    never touch it.
    """

    enabled = True

    def __init__(self) -> None:
        self.tick = 0
        self.records: list[EventRecord] = []

    def emit(self, module: str, kind: str, **payload: Any) -> EventRecord:
        record = EventRecord(self.tick, module, kind, payload)
        self.records.append(record)
        return record

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def kinds(self, module: str | None = None) -> list[str]:
        return [r.kind for r in self.records if module is None or r.module == module]

    def find(self, kind: str, **match: Any) -> list[EventRecord]:
        return [
            r for r in self.records
            if r.kind == kind and all(r.payload.get(k) == v for k, v in match.items())
        ]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)


class NullLog(EventLog):
    """Drops everything; used when nobody is listening."""

    enabled = False

    def emit(self, module: str, kind: str, **payload: Any) -> EventRecord:
        return EventRecord(self.tick, module, kind, payload)


def display_amount(value: int, base_units_per_coin: int, unit: str) -> str:
    """Human-readable coin amount, exact (no float rounding)."""
    coins = Decimal(value) / Decimal(base_units_per_coin)
    digits = len(str(base_units_per_coin)) - 1
    return f"{coins:.{digits}f} {unit}"
