"""Append-only event log; the audit surface for every invariant."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass(frozen=True)
class Event:
    seq: int
    t: float  # simulated milliseconds
    actor: str  # app package | proxy package | "os" | "operator"
    action: str
    params: dict
    verdict: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "t": self.t,
            "actor": self.actor,
            "action": self.action,
            "params": self.params,
            "verdict": self.verdict,
        }


class EventLog:
    def __init__(self):
        self._entries: list[Event] = []

    def append(self, t: float, actor: str, action: str, params: dict, verdict: str) -> Event:
        event = Event(
            seq=len(self._entries) + 1,
            t=t,
            actor=actor,
            action=action,
            params=params,
            verdict=verdict,
        )
        self._entries.append(event)
        return event

    def entries(self, since: int = 0) -> list[Event]:
        if since <= 0:
            return list(self._entries)
        return [e for e in self._entries if e.seq > since]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def to_ndjson(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self._entries)

    def find(self, **fields) -> list[Event]:
        """Entries whose top-level fields (and params sub-fields) match."""
        out = []
        for e in self._entries:
            d = e.to_dict()
            ok = True
            for k, v in fields.items():
                if k in ("seq", "t", "actor", "action", "verdict"):
                    if d[k] != v:
                        ok = False
                        break
                elif e.params.get(k) != v:
                    ok = False
                    break
            if ok:
                out.append(e)
        return out
