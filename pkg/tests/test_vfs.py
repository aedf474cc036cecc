import random

import pytest
from hypothesis import given, strategies as st

from conftest import manifest

from permesh import env
from permesh.errors import (
    EscapeError,
    FsNotFound,
    FsPermissionDenied,
    MalformedPathError,
)
from permesh.vfs import VirtualFS, canonicalize, sandbox_root_for

ROOT = "/sdcard/Android/data/com.example.app/files"


def reference_normalize(root, relative):
    """Independent lexical normalizer used as the oracle.

    Returns the canonical path, or None for any escape/malformed input.
    """
    if "\x00" in relative:
        return None
    full = relative if relative.startswith("/") else root + "/" + relative
    stack = []
    for seg in full.split("/"):
        if seg in ("", "."):
            continue
        if seg == "..":
            if not stack:
                return None
            stack.pop()
        else:
            stack.append(seg)
    result = "/" + "/".join(stack)
    root_segs = [s for s in root.split("/") if s]
    if stack[: len(root_segs)] != root_segs:
        return None
    return result


def canonical_or_none(root, relative):
    try:
        return canonicalize(root, relative)
    except (EscapeError, MalformedPathError):
        return None


def test_plain_join():
    assert canonicalize(ROOT, "notes/today.txt") == ROOT + "/notes/today.txt"


def test_dotdot_escape():
    with pytest.raises(EscapeError):
        canonicalize(ROOT, "../../../DCIM/photo.jpg")


def test_dot_and_dotdot_mix():
    assert canonicalize(ROOT, "a/./b/../c") == ROOT + "/a/c"
    assert reference_normalize(ROOT, "a/./b/../c") == ROOT + "/a/c"


def test_absolute_inside_root_ok():
    assert canonicalize(ROOT, ROOT + "/x/y") == ROOT + "/x/y"


def test_absolute_outside_root_is_escape():
    with pytest.raises(EscapeError):
        canonicalize(ROOT, "/sdcard/DCIM/img.jpg")


def test_prefix_trick_is_escape():
    # "/sdcard/Android/data/com.example.app/files-evil" shares a string
    # prefix but not a segment-boundary prefix
    with pytest.raises(EscapeError):
        canonicalize(ROOT, ROOT + "-evil/x")


def test_nul_rejected():
    with pytest.raises(MalformedPathError):
        canonicalize(ROOT, "a\x00b")


def test_idempotent():
    out = canonicalize(ROOT, "a/./b/../c")
    assert canonicalize(ROOT, out) == out


SEGMENTS = ["notes", "..", ".", "", "a b", "α", "...", "files", "DCIM", "..."]


def test_confinement_fuzz_matches_oracle():
    rng = random.Random(42)
    for _ in range(1500):
        parts = rng.choices(SEGMENTS, k=rng.randint(1, 6))
        rel = ("/" if rng.random() < 0.2 else "") + "/".join(parts)
        got = canonical_or_none(ROOT, rel)
        assert got == reference_normalize(ROOT, rel), rel
        if got is not None:
            assert got == ROOT or got.startswith(ROOT + "/")


@given(st.lists(st.sampled_from(SEGMENTS + ["x", "y.txt"]), min_size=1, max_size=8))
def test_confinement_property(parts):
    rel = "/".join(parts)
    got = canonical_or_none(ROOT, rel)
    assert got == reference_normalize(ROOT, rel)


def test_sandbox_root_template():
    assert sandbox_root_for("com.example.weather") == \
        "/sdcard/Android/data/com.example.weather/files"


def test_assign_root_idempotent(sim):
    a = sim.assign_app_root("com.x")
    b = sim.assign_app_root("com.x")
    assert a == b
    assert sim.fs.exists(a)


class TestFsAccess:
    def test_write_read_round_trip(self, sim):
        sim.install_app(manifest("com.ed", env.SELECTIVE_SD_CARD))
        sim.fs_access("com.ed", "cfg/settings.ini", "write", b"k=v")
        assert sim.fs_access("com.ed", "cfg/settings.ini", "read") == b"k=v"

    def test_absolute_foreign_path_denied(self, sim):
        sim.install_app(manifest("com.ed", env.SELECTIVE_SD_CARD))
        with pytest.raises(FsPermissionDenied):
            sim.fs_access("com.ed", "/sdcard/DCIM/img.jpg", "read")

    def test_legacy_reads_anywhere_on_card(self, sim):
        sim.install_app(manifest("com.ed", env.SELECTIVE_SD_CARD))
        sim.fs_access("com.ed", "private.txt", "write", b"secret")
        sim.install_app(manifest("com.old", env.WRITE_EXTERNAL_STORAGE, legacy=True))
        path = sandbox_root_for("com.ed") + "/private.txt"
        assert sim.fs_access("com.old", path, "read") == b"secret"

    def test_no_grant_denied(self, sim):
        sim.install_app(manifest("com.none"))
        with pytest.raises(FsPermissionDenied):
            sim.fs_access("com.none", "x.txt", "write", b"")

    def test_not_found(self, sim):
        sim.install_app(manifest("com.ed", env.SELECTIVE_SD_CARD))
        with pytest.raises(FsNotFound):
            sim.fs_access("com.ed", "missing.txt", "read")

    def test_isolation_between_proxied_apps(self, sim):
        sim.install_app(manifest("com.a", env.SELECTIVE_SD_CARD))
        sim.install_app(manifest("com.b", env.SELECTIVE_SD_CARD))
        sim.fs_access("com.a", "f.txt", "write", b"A")
        with pytest.raises(FsPermissionDenied):
            sim.fs_access("com.b", sandbox_root_for("com.a") + "/f.txt", "read")

    def test_mkdir_list_delete(self, sim):
        sim.install_app(manifest("com.ed", env.SELECTIVE_SD_CARD))
        sim.fs_access("com.ed", "d", "mkdir")
        sim.fs_access("com.ed", "d/one", "write", b"1")
        assert sim.fs_access("com.ed", "d", "list") == ["one"]
        sim.fs_access("com.ed", "d/one", "delete")
        assert sim.fs_access("com.ed", "d", "list") == []


def test_snapshot_round_trip():
    fs = VirtualFS.load({"DCIM": {"a.jpg": "xx"}, "readme": "hi"})
    assert fs.read("/sdcard/DCIM/a.jpg") == b"xx"
    dumped = fs.dump()
    assert dumped == {"DCIM": {"a.jpg": "xx"}, "readme": "hi"}
