"""Wildcard domain patterns used by the domain-selective network proxy.

A pattern is either an exact hostname ("news.bbc.co.uk") or a wildcard
("*.bbc.co.uk"). Wildcards are allowed only as the entire leftmost label.
A wildcard pattern matches the base domain itself as well as any subdomain
at a label boundary; this deliberately differs from TLS certificate
wildcards, where the apex is excluded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MalformedPatternError

_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")


def _check_labels(domain: str, what: str) -> None:
    labels = domain.split(".")
    if len(labels) < 2:
        raise MalformedPatternError(f"{what} needs at least two labels: {domain!r}")
    for label in labels:
        if not _LABEL_RE.match(label):
            raise MalformedPatternError(f"bad label {label!r} in {what} {domain!r}")


@dataclass(frozen=True)
class DomainPattern:
    """A parsed, normalized domain pattern."""

    raw: str
    normalized: str
    wildcard: bool

    @classmethod
    def parse(cls, raw: str) -> "DomainPattern":
        if not isinstance(raw, str) or not raw:
            raise MalformedPatternError(f"empty pattern: {raw!r}")
        normalized = raw.strip().lower()
        if "*" in normalized:
            if not normalized.startswith("*."):
                raise MalformedPatternError(
                    f"wildcard must be the entire leftmost label: {raw!r}"
                )
            base = normalized[2:]
            if "*" in base:
                raise MalformedPatternError(f"at most one wildcard: {raw!r}")
            _check_labels(base, "wildcard base")
            return cls(raw=raw, normalized=normalized, wildcard=True)
        _check_labels(normalized, "pattern")
        return cls(raw=raw, normalized=normalized, wildcard=False)

    @property
    def base(self) -> str:
        return self.normalized[2:] if self.wildcard else self.normalized

    def matches(self, host: str) -> bool:
        """True iff host equals the base domain or (for wildcards) is a
        label-boundary subdomain of it."""
        host = host.lower()
        if host == self.base:
            return True
        return self.wildcard and host.endswith("." + self.base)


def match_domain(pattern: str | DomainPattern, host: str) -> bool:
    if isinstance(pattern, str):
        pattern = DomainPattern.parse(pattern)
    return pattern.matches(host)


def is_valid_hostname(host: str) -> bool:
    try:
        _check_labels(host.lower(), "hostname")
    except MalformedPatternError:
        return False
    return True


_IP_LITERAL_RE = re.compile(r"^\d{1,3}(\.\d{1,3}){3}$")


def is_ip_literal(host: str) -> bool:
    return bool(_IP_LITERAL_RE.match(host))
