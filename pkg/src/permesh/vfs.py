"""Virtual SD-card filesystem with chroot-style per-app confinement.

Canonicalization is purely lexical; the virtual tree has no links, so
lexical and semantic resolution coincide here (on a real OS they would
not). ".." climbing past the sandbox root is an escape error, not a
clamp: the denial is the observable the model needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import (
    EscapeError,
    FsNotFound,
    IsADirectoryFsError,
    MalformedPathError,
    NotADirectoryFsError,
)

SDCARD_ROOT = "/sdcard"


def lexical_normalize(path: str) -> str:
    """Collapse ".", "..", empty segments; result is absolute.

    Raises MalformedPathError on embedded NUL or if ".." climbs above "/".
    """
    if "\x00" in path:
        raise MalformedPathError("embedded NUL in path")
    out: list[str] = []
    for seg in path.split("/"):
        if seg in ("", "."):
            continue
        if seg == "..":
            if not out:
                raise EscapeError(f"path climbs above root: {path!r}")
            out.pop()
        else:
            out.append(seg)
    return "/" + "/".join(out)


def canonicalize(root: str, relative: str) -> str:
    """Resolve a (possibly hostile) path against a sandbox root.

    Absolute inputs are accepted only if they already start inside the
    root; anything resolving outside the root is an EscapeError.
    """
    if "\x00" in relative:
        raise MalformedPathError("embedded NUL in path")
    root = lexical_normalize(root)
    if relative.startswith("/"):
        candidate = relative
    else:
        candidate = root + "/" + relative
    try:
        resolved = lexical_normalize(candidate)
    except EscapeError:
        raise EscapeError(f"path escapes sandbox {root!r}: {relative!r}") from None
    if resolved != root and not resolved.startswith(root + "/"):
        raise EscapeError(f"path escapes sandbox {root!r}: {relative!r}")
    return resolved


@dataclass(frozen=True)
class AppSandbox:
    package: str
    root_path: str


def sandbox_root_for(package: str) -> str:
    return f"{SDCARD_ROOT}/Android/data/{package}/files"


class _Dir(dict):
    """Directory node: maps segment -> _Dir | bytes."""


Node = Union[_Dir, bytes]


class VirtualFS:
    """In-memory tree rooted at /sdcard."""

    def __init__(self):
        self.root_node = _Dir()

    # -- node navigation ------------------------------------------------------

    def _segments(self, canonical: str) -> list[str]:
        if canonical == SDCARD_ROOT:
            return []
        if not canonical.startswith(SDCARD_ROOT + "/"):
            raise FsNotFound(f"path outside the SD card: {canonical!r}")
        return canonical[len(SDCARD_ROOT) + 1 :].split("/")

    def _lookup(self, canonical: str) -> Node:
        node: Node = self.root_node
        for seg in self._segments(canonical):
            if not isinstance(node, _Dir):
                raise NotADirectoryFsError(canonical)
            if seg not in node:
                raise FsNotFound(canonical)
            node = node[seg]
        return node

    def _parent_dir(self, canonical: str, create: bool) -> tuple[_Dir, str]:
        segs = self._segments(canonical)
        if not segs:
            raise IsADirectoryFsError(canonical)
        node: Node = self.root_node
        for seg in segs[:-1]:
            if not isinstance(node, _Dir):
                raise NotADirectoryFsError(canonical)
            if seg not in node:
                if not create:
                    raise FsNotFound(canonical)
                node[seg] = _Dir()
            node = node[seg]
        if not isinstance(node, _Dir):
            raise NotADirectoryFsError(canonical)
        return node, segs[-1]

    # -- operations -----------------------------------------------------------

    def mkdir(self, canonical: str) -> None:
        """Create the directory chain; idempotent."""
        node = self.root_node
        for seg in self._segments(canonical):
            child = node.get(seg)
            if child is None:
                child = node[seg] = _Dir()
            elif not isinstance(child, _Dir):
                raise NotADirectoryFsError(canonical)
            node = child

    def write(self, canonical: str, data: bytes) -> None:
        parent, name = self._parent_dir(canonical, create=True)
        if isinstance(parent.get(name), _Dir):
            raise IsADirectoryFsError(canonical)
        parent[name] = bytes(data)

    def read(self, canonical: str) -> bytes:
        node = self._lookup(canonical)
        if isinstance(node, _Dir):
            raise IsADirectoryFsError(canonical)
        return node

    def listdir(self, canonical: str) -> list[str]:
        node = self._lookup(canonical)
        if not isinstance(node, _Dir):
            raise NotADirectoryFsError(canonical)
        return sorted(node)

    def delete(self, canonical: str) -> None:
        parent, name = self._parent_dir(canonical, create=False)
        if name not in parent:
            raise FsNotFound(canonical)
        del parent[name]

    def exists(self, canonical: str) -> bool:
        try:
            self._lookup(canonical)
            return True
        except (FsNotFound, NotADirectoryFsError):
            return False

    # -- snapshot dump/load -----------------------------------------------------

    def dump(self) -> dict:
        def render(node: Node):
            if isinstance(node, _Dir):
                return {name: render(child) for name, child in sorted(node.items())}
            return node.decode("utf-8", errors="replace")

        return render(self.root_node)

    @classmethod
    def load(cls, tree: dict) -> "VirtualFS":
        fs = cls()

        def build(node_dict: dict, target: _Dir):
            for name, child in node_dict.items():
                if isinstance(child, dict):
                    sub = _Dir()
                    target[name] = sub
                    build(child, sub)
                else:
                    target[name] = str(child).encode("utf-8")

        build(tree, fs.root_node)
        return fs
