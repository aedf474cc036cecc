"""Simulated DNS (with resolve-and-pin) and the in-process stub HTTP server.

The rogue overlay models a malicious resolver that hands out a fake
address for an approved domain. Pinning binds each hostname to its
first-resolved address for the whole run, which defeats the substitution;
a pinning-off mode exists to demonstrate the attack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import MalformedUrlError


class ResolutionFailure(Exception):
    """Host has no address record."""


class PinMismatch(Exception):
    def __init__(self, host: str, pinned: str, resolved: str):
        super().__init__(f"{host}: pinned {pinned}, resolver now says {resolved}")
        self.host = host
        self.pinned = pinned
        self.resolved = resolved


class DnsTable:
    def __init__(self, records: Optional[dict[str, str]] = None):
        self.records: dict[str, str] = dict(records or {})
        self.rogue_overlay: dict[str, str] = {}
        self.rogue_active: bool = False
        self.pins: dict[str, str] = {}

    @classmethod
    def from_seed(cls, seed: dict[str, str]) -> "DnsTable":
        return cls({h.lower(): a for h, a in seed.items()})

    def set_rogue_overlay(self, mapping: dict[str, str], active: bool) -> None:
        self.rogue_overlay = {h.lower(): a for h, a in mapping.items()}
        self.rogue_active = active

    def _effective(self, host: str) -> str:
        if self.rogue_active and host in self.rogue_overlay:
            return self.rogue_overlay[host]
        if host in self.records:
            return self.records[host]
        raise ResolutionFailure(host)

    def resolve(self, host: str, pin: bool = True) -> str:
        """Resolve a hostname; with pinning, the first answer sticks for
        the rest of the run and later disagreement is a PinMismatch."""
        host = host.lower()
        address = self._effective(host)
        if not pin:
            return address
        pinned = self.pins.get(host)
        if pinned is None:
            self.pins[host] = address
            return address
        if address != pinned:
            raise PinMismatch(host, pinned, address)
        return pinned


class HttpStatus(str, Enum):
    DELIVERED = "delivered"
    DENIED_NO_GRANT = "denied-no-grant"
    DENIED_PIN_MISMATCH = "denied-pin-mismatch"
    BLOCKED_BY_POLICY = "blocked-by-policy"
    FAKE_UNREACHABLE = "fake-unreachable"
    PENDING = "pending"


@dataclass(frozen=True)
class HttpOutcome:
    status: HttpStatus
    detail: str = ""
    timing_ms: float = 0.0
    host: str = ""
    address: Optional[str] = None
    response_body: Optional[bytes] = None

    def app_visible(self) -> bytes:
        """The serialized result the app script observes.

        A fake-unreachable verdict must be byte-identical to a genuine
        resolution failure, so only status-class and host go in here.
        """
        if self.status is HttpStatus.DELIVERED:
            payload = {"ok": True, "host": self.host, "status": 200}
        elif self.status is HttpStatus.FAKE_UNREACHABLE:
            payload = {"error": "host-unreachable", "host": self.host}
        elif self.status is HttpStatus.BLOCKED_BY_POLICY:
            payload = {"error": "connection-refused", "host": self.host}
        elif self.status is HttpStatus.DENIED_PIN_MISMATCH:
            payload = {"error": "connection-refused", "host": self.host}
        else:
            payload = {"error": "permission-denied", "host": self.host}
        return json.dumps(payload, sort_keys=True).encode()

    @property
    def app_kind(self) -> str:
        """Coarse app-visible outcome name used by script assertions."""
        if self.status is HttpStatus.DELIVERED:
            return "delivered"
        if self.status is HttpStatus.FAKE_UNREACHABLE:
            return "unreachable"
        if self.status in (HttpStatus.BLOCKED_BY_POLICY, HttpStatus.DENIED_PIN_MISMATCH):
            return "refused"
        if self.status is HttpStatus.PENDING:
            return "pending"
        return "permission-denied"


def parse_url(url: str) -> tuple[str, int, str]:
    """Accepts the simulator's URL subset: http://host[:port]/path."""
    if not isinstance(url, str) or not url.startswith("http://"):
        raise MalformedUrlError(f"only http:// URLs are accepted: {url!r}")
    rest = url[len("http://") :]
    if not rest:
        raise MalformedUrlError(f"missing host: {url!r}")
    slash = rest.find("/")
    authority, path = (rest, "/") if slash < 0 else (rest[:slash], rest[slash:])
    if not authority:
        raise MalformedUrlError(f"missing host: {url!r}")
    port = 80
    if ":" in authority:
        host, _, port_s = authority.partition(":")
        try:
            port = int(port_s)
        except ValueError:
            raise MalformedUrlError(f"bad port in {url!r}") from None
    else:
        host = authority
    if not host:
        raise MalformedUrlError(f"missing host: {url!r}")
    return host.lower(), port, path


@dataclass
class StubRequest:
    method: str
    host: str
    address: str
    path: str
    body: bytes


@dataclass
class StubServer:
    """Synchronous in-process HTTP endpoint; echoes the body back."""

    latency_ms: float = 1.0
    received: list[StubRequest] = field(default_factory=list)

    def handle(self, method: str, host: str, address: str, path: str, body: bytes) -> bytes:
        self.received.append(StubRequest(method, host, address, path, bytes(body)))
        return bytes(body)
