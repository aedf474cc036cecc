import pytest

from permesh import env
from permesh.permissions import AppManifest, PermissionRequest
from permesh.simulator import Simulator


@pytest.fixture
def sim():
    s = Simulator()
    s.seed_standard()
    return s


def manifest(package, *perms, legacy=False, proxies=()):
    reqs = []
    for p in perms:
        if isinstance(p, tuple):
            reqs.append(PermissionRequest(p[0], tuple(p[1])))
        else:
            reqs.append(PermissionRequest(p))
    return AppManifest(package=package, permissions=reqs,
                       proxies=list(proxies), legacy=legacy)


def install_legacy_internet(sim, package="com.legacy.app"):
    sim.install_app(manifest(package, env.INTERNET, legacy=True))
    return package


def install_domain_selective(sim, package="com.proxied.app", patterns=("*.bbc.co.uk",)):
    sim.install_app(manifest(package, (env.DOMAIN_SELECTIVE, patterns)))
    return package
