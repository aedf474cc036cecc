"""Split/merge proxy descriptors and the hierarchy built from them.

A proxy takes permissions from the layer below and exposes a single new
permission above. Split proxies narrow one coarse permission via
parameters; merge proxies bundle two or more permissions into a
semantically meaningful one. The requires-graph is kept acyclic, and
hermetic interposition means an app holding only a proxy-defined
permission can reach the underlying capabilities only through that
proxy's API surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    CycleDetectedError,
    DuplicateExposedIdError,
    InvalidProxyError,
    UnknownProxyError,
    UnknownRequirementError,
)
from .permissions import (
    ParamSchema,
    Permission,
    PermissionKind,
    PermissionRegistry,
)

PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class Requirement:
    """One lower-layer permission a proxy needs.

    params is a fixed binding, PASSTHROUGH (the caller's parameters flow
    down unchanged), or None.
    """

    id: str
    params: Optional[tuple | str] = None

    @property
    def passthrough(self) -> bool:
        return self.params == PASSTHROUGH


@dataclass(frozen=True)
class ProxyDescriptor:
    id: str
    kind: str  # "split" | "merge"
    exposes: Permission
    requires: tuple[Requirement, ...]
    api_surface: frozenset[str]
    loc_estimate: int = 0
    builtin: bool = False  # provenance tag only; no behavioral difference

    @classmethod
    def from_dict(cls, data: dict) -> "ProxyDescriptor":
        for key in ("id", "kind", "exposes", "requires", "api"):
            if key not in data:
                raise InvalidProxyError(f"proxy descriptor missing {key!r}")
        if data["kind"] not in ("split", "merge"):
            raise InvalidProxyError(f"proxy kind must be split or merge: {data['kind']!r}")
        exp = data["exposes"]
        schema = None
        if exp.get("paramSchema"):
            schema = ParamSchema(kind=exp["paramSchema"])
        exposes = Permission(
            id=exp["id"],
            kind=PermissionKind.PROXY_DEFINED,
            label=exp.get("label", exp["id"]),
            description=exp.get("description", ""),
            param_schema=schema,
        )
        reqs = []
        for r in data["requires"]:
            params = r.get("params")
            if params == PASSTHROUGH:
                reqs.append(Requirement(r["id"], PASSTHROUGH))
            elif params:
                reqs.append(Requirement(r["id"], tuple(params)))
            else:
                reqs.append(Requirement(r["id"]))
        return cls(
            id=data["id"],
            kind=data["kind"],
            exposes=exposes,
            requires=tuple(reqs),
            api_surface=frozenset(data["api"]),
            loc_estimate=int(data.get("loc", 0)),
            builtin=bool(data.get("builtin", False)),
        )


class ProxyStore:
    """Available proxy descriptors (the local analog of a store section)
    plus the set of installed ones."""

    def __init__(self, registry: PermissionRegistry):
        self.registry = registry
        self.available: dict[str, ProxyDescriptor] = {}
        self.installed: set[str] = set()
        # exposed permission id -> descriptor
        self._by_exposed: dict[str, ProxyDescriptor] = {}

    # -- registration --------------------------------------------------------

    def register(self, descriptor: ProxyDescriptor) -> None:
        self._validate(descriptor, replacing=False)
        self.registry.register_proxy_defined(descriptor.exposes)
        self.available[descriptor.id] = descriptor
        self._by_exposed[descriptor.exposes.id] = descriptor
        self._check_acyclic()

    def replace(self, descriptor: ProxyDescriptor) -> None:
        """Swap in an after-market version carrying the same exposed id."""
        old = self._by_exposed.get(descriptor.exposes.id)
        if old is None:
            raise UnknownProxyError(
                f"no proxy exposes {descriptor.exposes.id!r}; use register"
            )
        self._validate(descriptor, replacing=True)
        del self.available[old.id]
        self.available[descriptor.id] = descriptor
        self._by_exposed[descriptor.exposes.id] = descriptor
        self.registry.replace(descriptor.exposes)
        if old.id in self.installed:
            self.installed.discard(old.id)
            self.installed.add(descriptor.id)
        self._check_acyclic()

    def _validate(self, d: ProxyDescriptor, replacing: bool) -> None:
        current = self._by_exposed.get(d.exposes.id) if replacing else None
        if d.id in self.available and (current is None or current.id != d.id):
            raise InvalidProxyError(f"proxy id {d.id!r} already registered")
        if not d.requires:
            raise InvalidProxyError(f"proxy {d.id!r} requires nothing")
        for req in d.requires:
            if req.id == d.exposes.id:
                raise CycleDetectedError(f"proxy {d.id!r} requires its own exposed permission")
            if req.id not in self.registry and not (
                replacing and req.id == d.exposes.id
            ):
                raise UnknownRequirementError(f"proxy {d.id!r} requires unknown {req.id!r}")
        if not replacing and d.exposes.id in self.registry:
            raise DuplicateExposedIdError(f"permission {d.exposes.id!r} already exists")
        if d.kind == "split":
            if len(d.requires) != 1:
                raise InvalidProxyError("split proxies require exactly one permission")
            req = d.requires[0]
            if d.exposes.param_schema is None and not (
                req.params and not req.passthrough
            ):
                raise InvalidProxyError(
                    "split proxies must expose a parameter-narrowed form"
                )
        else:
            if len(d.requires) < 2:
                raise InvalidProxyError("merge proxies require two or more permissions")

    def _check_acyclic(self) -> None:
        # requires may only reference already-registered permissions, so a
        # cycle would need a forward reference; re-verify anyway since
        # replace() can rewrite edges.
        visiting: set[str] = set()
        done: set[str] = set()

        def visit(perm_id: str) -> None:
            if perm_id in done:
                return
            if perm_id in visiting:
                raise CycleDetectedError(f"cycle through permission {perm_id!r}")
            d = self._by_exposed.get(perm_id)
            if d is not None:
                visiting.add(perm_id)
                for req in d.requires:
                    visit(req.id)
                visiting.discard(perm_id)
            done.add(perm_id)

        for perm_id in self._by_exposed:
            visit(perm_id)

    # -- lookups --------------------------------------------------------------

    def get(self, proxy_id: str) -> ProxyDescriptor:
        try:
            return self.available[proxy_id]
        except KeyError:
            raise UnknownProxyError(f"unknown proxy {proxy_id!r}") from None

    def exposing(self, permission_id: str) -> Optional[ProxyDescriptor]:
        return self._by_exposed.get(permission_id)

    # -- footprint -------------------------------------------------------------

    def resolve_footprint(
        self, permission_id: str, params: Optional[tuple] = None
    ) -> frozenset[tuple[str, Optional[tuple]]]:
        """Set of (native permission id, bound params) transitively
        reachable from a permission, with parameter bindings propagated
        downward."""
        perm = self.registry.get(permission_id)
        if perm.kind is PermissionKind.NATIVE:
            return frozenset({(permission_id, tuple(params) if params else None)})
        descriptor = self._by_exposed[permission_id]
        out: set[tuple[str, Optional[tuple]]] = set()
        for req in descriptor.requires:
            if req.passthrough:
                down = params
            elif req.params:
                down = req.params
            else:
                down = None
            out |= self.resolve_footprint(req.id, down)
        return frozenset(out)

    # -- dependency resolution ---------------------------------------------------

    def resolve_dependencies(self, proxy_ids: list[str]) -> list[str]:
        """Dependency-respecting install order for the given proxies and
        everything beneath them, omitting already-installed ones."""
        order: list[str] = []
        seen: set[str] = set()

        def visit(proxy_id: str) -> None:
            if proxy_id in seen:
                return
            seen.add(proxy_id)
            d = self.get(proxy_id)
            for req in d.requires:
                below = self._by_exposed.get(req.id)
                if below is not None:
                    visit(below.id)
            if proxy_id not in self.installed:
                order.append(proxy_id)

        for pid in proxy_ids:
            visit(pid)
        return order
