"""Permission registry, app manifests, and the uid/usergroup grant table.

All enforcement in the simulator ultimately reduces to this layer: an
access is allowed at the OS level iff the app's uid is a member of the
usergroup of a native permission whose bound parameters cover the access.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .domains import DomainPattern
from .errors import (
    DuplicatePackageError,
    DuplicatePermissionError,
    InvalidParameterError,
    MalformedPatternError,
    UnknownPermissionError,
)

FIRST_APP_UID = 10000


class PermissionKind(str, Enum):
    NATIVE = "native"
    PROXY_DEFINED = "proxy-defined"


@dataclass(frozen=True)
class ParamSchema:
    """Descriptor of install-time parameters a permission accepts.

    kind "domain-list": values are one or more wildcard domain patterns.
    kind "app-sandbox": no explicit values; the binding is derived from the
    requesting app's package name.
    """

    kind: str

    def validate(self, values: Optional[list]) -> Optional[tuple]:
        if self.kind == "domain-list":
            if not values:
                raise InvalidParameterError("domain-list requires at least one pattern")
            out = []
            for v in values:
                try:
                    out.append(DomainPattern.parse(v).normalized)
                except MalformedPatternError as exc:
                    raise InvalidParameterError(str(exc)) from exc
            return tuple(out)
        if self.kind == "app-sandbox":
            if values:
                raise InvalidParameterError("app-sandbox permissions take no parameters")
            return None
        raise InvalidParameterError(f"unknown parameter schema kind {self.kind!r}")


@dataclass(frozen=True)
class Permission:
    id: str
    kind: PermissionKind
    label: str
    description: str = ""
    param_schema: Optional[ParamSchema] = None

    def __post_init__(self):
        if not self.label:
            raise InvalidParameterError(f"permission {self.id!r} needs a label")

    def bind_params(self, values: Optional[list]) -> Optional[tuple]:
        if self.param_schema is None:
            if values:
                raise InvalidParameterError(
                    f"permission {self.id!r} takes no parameters"
                )
            return None
        return self.param_schema.validate(values)


@dataclass(frozen=True)
class PermissionRequest:
    """One entry of a manifest's requested-permissions list."""

    id: str
    params: Optional[tuple] = None


@dataclass
class AppManifest:
    package: str
    permissions: list[PermissionRequest] = field(default_factory=list)
    proxies: list[str] = field(default_factory=list)
    legacy: bool = False

    _FIELDS = {"package", "permissions", "proxies", "legacy"}

    @classmethod
    def from_dict(cls, data: dict) -> "AppManifest":
        if not isinstance(data, dict):
            raise InvalidParameterError("manifest must be a JSON object")
        unknown = set(data) - cls._FIELDS
        if unknown:
            raise InvalidParameterError(f"unknown manifest fields: {sorted(unknown)}")
        package = data.get("package")
        if not package or not isinstance(package, str):
            raise InvalidParameterError("manifest needs a non-empty 'package'")
        perms = []
        for entry in data.get("permissions", []):
            if not isinstance(entry, dict) or "id" not in entry:
                raise InvalidParameterError(f"bad permission entry: {entry!r}")
            extra = set(entry) - {"id", "params"}
            if extra:
                raise InvalidParameterError(f"unknown permission entry fields: {sorted(extra)}")
            params = entry.get("params")
            perms.append(
                PermissionRequest(entry["id"], tuple(params) if params else None)
            )
        proxies = list(data.get("proxies", []))
        legacy = bool(data.get("legacy", False))
        return cls(package=package, permissions=perms, proxies=proxies, legacy=legacy)


@dataclass(frozen=True)
class AppInstance:
    package: str
    uid: int
    manifest: AppManifest
    is_proxy: bool = False


class PermissionRegistry:
    """Registry of all known permissions, native and proxy-defined."""

    def __init__(self):
        self._permissions: dict[str, Permission] = {}

    def register_native(
        self,
        id: str,
        label: str,
        description: str = "",
        param_schema: Optional[ParamSchema] = None,
    ) -> Permission:
        return self._register(
            Permission(id, PermissionKind.NATIVE, label, description, param_schema)
        )

    def register_proxy_defined(self, permission: Permission) -> Permission:
        if permission.kind is not PermissionKind.PROXY_DEFINED:
            raise InvalidParameterError("expected a proxy-defined permission")
        return self._register(permission)

    def _register(self, permission: Permission) -> Permission:
        if permission.id in self._permissions:
            raise DuplicatePermissionError(f"permission {permission.id!r} already registered")
        self._permissions[permission.id] = permission
        return permission

    def replace(self, permission: Permission) -> None:
        """Atomic swap used by proxy replacement; id must exist."""
        if permission.id not in self._permissions:
            raise UnknownPermissionError(permission.id)
        self._permissions[permission.id] = permission

    def get(self, id: str) -> Permission:
        try:
            return self._permissions[id]
        except KeyError:
            raise UnknownPermissionError(f"unknown permission {id!r}") from None

    def __contains__(self, id: str) -> bool:
        return id in self._permissions

    def all(self) -> list[Permission]:
        return list(self._permissions.values())


class GrantTable:
    """uid assignment plus one simulated usergroup per permission."""

    def __init__(self, first_uid: int = FIRST_APP_UID):
        self._next_uid = first_uid
        self.uid_assignments: dict[str, int] = {}
        self.group_membership: dict[str, set[int]] = {}
        self.grant_parameters: dict[tuple[int, str], Optional[tuple]] = {}

    def assign_uid(self, package: str) -> int:
        if package in self.uid_assignments:
            raise DuplicatePackageError(f"package {package!r} already installed")
        uid = self._next_uid
        self._next_uid += 1
        self.uid_assignments[package] = uid
        return uid

    def grant(self, uid: int, permission_id: str, params: Optional[tuple]) -> None:
        self.group_membership.setdefault(permission_id, set()).add(uid)
        self.grant_parameters[(uid, permission_id)] = params

    def uid_of(self, package: str) -> Optional[int]:
        return self.uid_assignments.get(package)

    def holds(self, uid: int, permission_id: str) -> bool:
        return uid in self.group_membership.get(permission_id, ())

    def params_of(self, uid: int, permission_id: str) -> Optional[tuple]:
        return self.grant_parameters.get((uid, permission_id))

    def grants_of(self, uid: int) -> list[tuple[str, Optional[tuple]]]:
        return sorted(
            (pid, self.grant_parameters.get((uid, pid)))
            for pid, members in self.group_membership.items()
            if uid in members
        )


def render_install_prompt(registry: PermissionRegistry, manifest: AppManifest) -> list[str]:
    """One human-readable line per requested permission, in manifest order."""
    lines = []
    for req in manifest.permissions:
        perm = registry.get(req.id)
        params = perm.bind_params(list(req.params) if req.params else None)
        if params:
            lines.append(f"{perm.label} ({', '.join(params)})")
        else:
            lines.append(perm.label)
    return lines
