"""permesh: a deterministic simulator for split/merge permission proxies,
domain-selective networking with DNS pinning, chroot-style storage
confinement, and an interactive slicing firewall."""

from .permissions import AppManifest, GrantTable, Permission, PermissionRegistry
from .proxies import ProxyDescriptor, ProxyStore
from .simulator import Simulator
from .scenario import Report, Scenario, load_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AppManifest",
    "GrantTable",
    "Permission",
    "PermissionRegistry",
    "ProxyDescriptor",
    "ProxyStore",
    "Report",
    "Scenario",
    "Simulator",
    "load_scenario",
    "run_scenario",
    "__version__",
]
