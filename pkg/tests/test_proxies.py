import random

import pytest

from conftest import manifest

from permesh import env
from permesh.errors import (
    CycleDetectedError,
    GrantRejectedError,
    InvalidProxyError,
    UnknownProxyError,
)
from permesh.permissions import PermissionRegistry
from permesh.proxies import ProxyDescriptor, ProxyStore
from permesh.simulator import Simulator


def descriptor(id, kind, exposes_id, requires, api=("op.x",), schema=None, label=None):
    return ProxyDescriptor.from_dict(
        {
            "id": id,
            "kind": kind,
            "exposes": {
                "id": exposes_id,
                "label": label or exposes_id,
                **({"paramSchema": schema} if schema else {}),
            },
            "requires": requires,
            "api": list(api),
        }
    )


def test_standard_registry_three_layers(sim):
    # stats proxy sits on the domain-selective proxy which sits on natives
    d = sim.store.exposing(env.COLLECT_USAGE_STATISTICS)
    assert d.kind == "merge"
    below = sim.store.exposing(env.DOMAIN_SELECTIVE)
    assert below.kind == "split"
    assert {r.id for r in d.requires} == {env.DOMAIN_SELECTIVE, env.ACCESS_NETWORK_STATE}


def test_self_loop_rejected(sim):
    bad = descriptor("p.loop", "merge", "perm.loop",
                     [{"id": "perm.loop"}, {"id": env.INTERNET}])
    with pytest.raises(CycleDetectedError):
        sim.store.register(bad)


def test_unknown_requirement(sim):
    bad = descriptor("p.u", "merge", "perm.u",
                     [{"id": "perm.nothere"}, {"id": env.INTERNET}])
    with pytest.raises(Exception):
        sim.store.register(bad)


def test_split_shape_enforced(sim):
    with pytest.raises(InvalidProxyError):
        sim.store.register(
            descriptor("p.s", "split", "perm.s",
                       [{"id": env.INTERNET}, {"id": env.BLUETOOTH}], schema="domain-list")
        )
    with pytest.raises(InvalidProxyError):
        sim.store.register(
            descriptor("p.s2", "split", "perm.s2", [{"id": env.INTERNET}])
        )  # no narrowing at all


def test_merge_needs_two(sim):
    with pytest.raises(InvalidProxyError):
        sim.store.register(descriptor("p.m", "merge", "perm.m", [{"id": env.INTERNET}]))


def test_dependency_order_clean_device(sim):
    order = sim.resolve_proxy_dependencies(
        manifest("com.game", env.COLLECT_USAGE_STATISTICS)
    )
    assert order == ["org.proxy.net.domain_selective", "org.proxy.stats.collect_usage"]


def test_dependency_order_already_installed(sim):
    sim.install_app(manifest("com.game", env.COLLECT_USAGE_STATISTICS))
    assert sim.resolve_proxy_dependencies(
        manifest("com.game2", env.COLLECT_USAGE_STATISTICS)
    ) == []


def test_unknown_proxy_id(sim):
    with pytest.raises(UnknownProxyError):
        sim.resolve_proxy_dependencies(manifest("com.x", proxies=["org.proxy.nope"]))


def test_rejected_proxy_grant_aborts_install(sim):
    with pytest.raises(GrantRejectedError):
        sim.install_app(
            manifest("com.game", env.COLLECT_USAGE_STATISTICS),
            reject_proxies={"org.proxy.net.domain_selective"},
        )
    assert "com.game" not in sim.apps


def test_authorize_hermetic(sim):
    sim.install_app(manifest("com.ds", (env.DOMAIN_SELECTIVE, ["*.bbc.co.uk"])))
    assert sim.authorize_call("com.ds", "proxy.net.http") == "allow"
    assert sim.authorize_call("com.ds", "net.socket") == "deny"


def test_authorize_legacy_native(sim):
    sim.install_app(manifest("com.legacy", env.INTERNET, legacy=True))
    assert sim.authorize_call("com.legacy", "net.socket") == "allow"
    assert sim.authorize_call("com.legacy", "proxy.net.http") == "deny"


def test_authorize_no_grants(sim):
    sim.install_app(manifest("com.none"))
    for op in list(env.NATIVE_API_TABLE) + ["proxy.net.http", "proxy.stats.report"]:
        assert sim.authorize_call("com.none", op) == "deny"
    assert sim.authorize_call("com.uninstalled", "net.socket") == "deny"


def test_replace_proxy_same_exposed_id(sim):
    better = descriptor(
        "org.proxy.net.domain_selective_v2",
        "split",
        env.DOMAIN_SELECTIVE,
        [{"id": env.INTERNET, "params": "passthrough"}],
        api=("proxy.net.http", "proxy.net.http2"),
        schema="domain-list",
    )
    sim.store.replace(better)
    assert sim.store.exposing(env.DOMAIN_SELECTIVE).id.endswith("_v2")
    assert "org.proxy.net.domain_selective" not in sim.store.available
    # footprint semantics preserved
    assert sim.resolve_footprint(env.DOMAIN_SELECTIVE, ("*.x.com",)) == {
        (env.INTERNET, ("*.x.com",))
    }


# -- no-privilege-amplification property over random proxy graphs ------------


def oracle_reachable_natives(descriptors, natives, perm_id):
    """Graph-reachability reference: the set of native ids reachable from
    perm_id through requires edges, ignoring parameters."""
    by_exposed = {d.exposes.id: d for d in descriptors}
    seen, stack, out = set(), [perm_id], set()
    while stack:
        p = stack.pop()
        if p in seen:
            continue
        seen.add(p)
        if p in natives:
            out.add(p)
        else:
            stack.extend(r.id for r in by_exposed[p].requires)
    return out


@pytest.mark.parametrize("seed", range(12))
def test_footprint_matches_reachability_oracle(seed):
    rng = random.Random(seed)
    registry = PermissionRegistry()
    store = ProxyStore(registry)
    natives = [f"native.p{i}" for i in range(rng.randint(2, 5))]
    for n in natives:
        registry.register_native(n, n)
    descriptors = []
    layer_perms = list(natives)
    for i in range(rng.randint(1, 6)):
        k = rng.randint(1, min(3, len(layer_perms)))
        requires = rng.sample(layer_perms, k)
        kind = "merge" if len(requires) >= 2 else "split"
        d = descriptor(
            f"proxy.{seed}.{i}",
            kind,
            f"perm.{seed}.{i}",
            [{"id": r} for r in requires],
            schema="domain-list" if kind == "split" else None,
        )
        store.register(d)
        descriptors.append(d)
        layer_perms.append(d.exposes.id)

    native_set = set(natives)
    for d in descriptors:
        got = {fid for fid, _ in store.resolve_footprint(d.exposes.id)}
        expected = oracle_reachable_natives(descriptors, native_set, d.exposes.id)
        assert got == expected
        # footprint of a proxy equals the union over its requirements
        union = set()
        for r in d.requires:
            union |= {fid for fid, _ in store.resolve_footprint(r.id)}
        assert got == union
