"""The simulator facade: one object owning all state, mutated only through
a logically serialized command queue (a single lock in practice).

Every mediated action is appended to the event log with enough fields for
the post-hoc auditor to re-derive the enforcement invariants.
"""

from __future__ import annotations

import json
import threading
from typing import Callable, Iterable, Optional

from . import env
from .devices import ANALYTICS_HOST, NetworkState, PhoneService, StatsBuffer
from .domains import DomainPattern, is_ip_literal
from .errors import (
    AlreadyResolvedError,
    DuplicatePackageError,
    FsNotFound,
    FsPermissionDenied,
    GrantRejectedError,
    MissingProxyError,
    NotALegacyAppError,
    UnknownPermissionError,
)
from .events import Event, EventLog
from .firewall import Firewall, PendingDecision, SliceAction, SlicePolicy
from .netsim import (
    DnsTable,
    HttpOutcome,
    HttpStatus,
    PinMismatch,
    ResolutionFailure,
    StubServer,
    parse_url,
)
from .permissions import (
    AppInstance,
    AppManifest,
    GrantTable,
    PermissionKind,
    PermissionRegistry,
    PermissionRequest,
    render_install_prompt,
)
from .proxies import ProxyDescriptor, ProxyStore
from .vfs import SDCARD_ROOT, VirtualFS, canonicalize, sandbox_root_for

ALLOW = "allow"
DENY = "deny"

MEDIATED_HTTP_OP = "proxy.net.http"
MEDIATED_FS_OP = "proxy.fs.io"
STATS_REPORT_OP = "proxy.stats.report"
PHONE_INCOMING_OP = "proxy.phone.incoming"
PHONE_ANSWER_OP = "proxy.phone.answer"
PHONE_MIC_OP = "proxy.phone.mic"
PHONE_BT_OP = "proxy.phone.bluetooth"


class Simulator:
    def __init__(
        self,
        dns: Optional[DnsTable] = None,
        fs: Optional[VirtualFS] = None,
        pinning: bool = True,
        latency_ms: float = 1.0,
        tick_ms: float = 1.0,
    ):
        self.lock = threading.RLock()
        self.registry = PermissionRegistry()
        self.store = ProxyStore(self.registry)
        self.grants = GrantTable()
        self.dns = dns or DnsTable()
        self.fs = fs or VirtualFS()
        self.firewall = Firewall()
        self.stats = StatsBuffer()
        self.network = NetworkState(connected=False)
        self.phone = PhoneService()
        self.log = EventLog()
        self.stub = StubServer(latency_ms=latency_ms)
        self.pinning = pinning
        self.latency_ms = latency_ms
        self.tick_ms = tick_ms
        self.now = 0.0
        self.apps: dict[str, AppInstance] = {}
        self.sandboxes: dict[str, str] = {}
        # hooks the runtime uses to observe prompts
        self.on_pending: Optional[Callable[[PendingDecision], None]] = None

    # -- environment -----------------------------------------------------------

    def seed_standard(self, proxies: bool = True) -> None:
        for pid, label, desc in env.NATIVE_PERMISSIONS:
            self.registry.register_native(pid, label, desc)
        if proxies:
            for descriptor in env.load_standard_proxies():
                self.store.register(descriptor)

    def tick(self) -> None:
        self.now += self.tick_ms

    def _log(self, actor: str, action: str, params: dict, verdict: str) -> Event:
        return self.log.append(self.now, actor, action, params, verdict)

    # -- install flow ------------------------------------------------------------

    def install_proxy(self, proxy_id: str, decision: str = "accept-all") -> AppInstance:
        """Install a proxy like a normal app: it requests its own required
        permissions and gets no special privileges."""
        descriptor = self.store.get(proxy_id)
        if proxy_id in self.store.installed:
            return self.apps[proxy_id]
        if decision != "accept-all":
            self._log("operator", "install-proxy", {"proxy": proxy_id}, "grant-rejected")
            raise GrantRejectedError(f"grants declined for proxy {proxy_id!r}")
        requests = [
            PermissionRequest(req.id, None if req.passthrough else req.params)
            for req in descriptor.requires
        ]
        manifest = AppManifest(package=proxy_id, permissions=requests)
        uid = self.grants.assign_uid(proxy_id)
        for req in requests:
            perm = self.registry.get(req.id)
            params = perm.bind_params(list(req.params) if req.params else None)
            self.grants.grant(uid, req.id, params)
        instance = AppInstance(package=proxy_id, uid=uid, manifest=manifest, is_proxy=True)
        self.apps[proxy_id] = instance
        self.store.installed.add(proxy_id)
        self._log("os", "install-proxy", {"proxy": proxy_id, "uid": uid}, "installed")
        return instance

    def resolve_proxy_dependencies(self, manifest: AppManifest) -> list[str]:
        wanted = list(manifest.proxies)
        for req in manifest.permissions:
            if req.id not in self.registry:
                raise UnknownPermissionError(f"unknown permission {req.id!r}")
            perm = self.registry.get(req.id)
            if perm.kind is PermissionKind.PROXY_DEFINED:
                descriptor = self.store.exposing(req.id)
                if descriptor is None:
                    raise MissingProxyError(f"no proxy exposes {req.id!r}")
                if descriptor.id not in wanted:
                    wanted.append(descriptor.id)
        return self.store.resolve_dependencies(wanted)

    def install_app(
        self,
        manifest: AppManifest,
        decision: str = "accept-all",
        reject_proxies: Iterable[str] = (),
    ) -> Optional[AppInstance]:
        """Returns the installed instance, or None if the user rejected."""
        if manifest.package in self.grants.uid_assignments:
            raise DuplicatePackageError(f"package {manifest.package!r} already installed")
        bound: list[tuple[str, Optional[tuple]]] = []
        for req in manifest.permissions:
            perm = self.registry.get(req.id)
            bound.append((req.id, perm.bind_params(list(req.params) if req.params else None)))
        order = self.resolve_proxy_dependencies(manifest)
        reject_proxies = set(reject_proxies)
        for proxy_id in order:
            self.install_proxy(
                proxy_id, "reject" if proxy_id in reject_proxies else "accept-all"
            )
        if decision != "accept-all":
            self._log("os", "install", {"package": manifest.package}, "aborted")
            return None
        uid = self.grants.assign_uid(manifest.package)
        for perm_id, params in bound:
            self.grants.grant(uid, perm_id, params)
        instance = AppInstance(package=manifest.package, uid=uid, manifest=manifest)
        self.apps[manifest.package] = instance
        if self.grants.holds(uid, env.SELECTIVE_SD_CARD):
            self.assign_app_root(manifest.package)
        self._log(
            "os",
            "install",
            {"package": manifest.package, "uid": uid,
             "grants": [p for p, _ in bound]},
            "installed",
        )
        return instance

    def render_install_prompt(self, manifest: AppManifest) -> list[str]:
        return render_install_prompt(self.registry, manifest)

    def resolve_footprint(self, permission_id: str, params: Optional[tuple] = None):
        return self.store.resolve_footprint(permission_id, params)

    # -- authorization -------------------------------------------------------------

    def authorize_call(self, package: str, api_op: str) -> str:
        """OS-plus-proxy gate: allow iff the op is on the API surface of a
        proxy whose exposed permission the caller holds, or is a native API
        covered by a directly held native grant."""
        uid = self.grants.uid_of(package)
        if uid is None:
            return DENY
        for perm_id, _params in self.grants.grants_of(uid):
            perm = self.registry.get(perm_id)
            if perm.kind is PermissionKind.PROXY_DEFINED:
                descriptor = self.store.exposing(perm_id)
                if descriptor is not None and api_op in descriptor.api_surface:
                    return ALLOW
        native_perm = env.NATIVE_API_TABLE.get(api_op)
        if native_perm is not None and self.grants.holds(uid, native_perm):
            return ALLOW
        return DENY

    # -- network -------------------------------------------------------------------

    def open_raw_socket(self, package: str, address: str) -> str:
        uid = self.grants.uid_of(package)
        ok = uid is not None and self.grants.holds(uid, env.INTERNET)
        verdict = "connected" if ok else "denied"
        self._log(package, "raw-socket", {"address": address}, verdict)
        return verdict

    def _granted_patterns(self, package: str) -> list[DomainPattern]:
        """Domain patterns bound to whichever proxy-defined grant exposes
        the mediated HTTP op."""
        uid = self.grants.uid_of(package)
        if uid is None:
            return []
        patterns: list[DomainPattern] = []
        for perm_id, params in self.grants.grants_of(uid):
            perm = self.registry.get(perm_id)
            if perm.kind is not PermissionKind.PROXY_DEFINED:
                continue
            descriptor = self.store.exposing(perm_id)
            if descriptor is None or MEDIATED_HTTP_OP not in descriptor.api_surface:
                continue
            for raw in params or ():
                patterns.append(DomainPattern.parse(raw))
        return patterns

    def http_request(
        self,
        package: str,
        method: str,
        url: str,
        body: bytes = b"",
        on_outcome: Optional[Callable[[HttpOutcome], None]] = None,
        stat_meta: Optional[dict] = None,
    ) -> HttpOutcome:
        """Full mediation pipeline. May return a PENDING outcome, in which
        case on_outcome fires when the operator decides."""
        host, _port, path = parse_url(url)
        base_params: dict = {"method": method, "url": url, "host": host, "path": path}
        if stat_meta:
            base_params.update(stat_meta)

        def finish(outcome: HttpOutcome, extra: Optional[dict] = None) -> HttpOutcome:
            params = dict(base_params)
            params["route"] = route
            if outcome.address:
                params["address"] = outcome.address
            if extra:
                params.update(extra)
            self._log(package, "http", params, outcome.status.value)
            return outcome

        if self.authorize_call(package, "net.socket") == ALLOW:
            route = "native"
            policy = self.firewall.policy_for(package)
            if policy is not None:
                verdict = self.firewall.evaluate(package, host)
                if verdict is SliceAction.BLOCK:
                    return finish(
                        HttpOutcome(HttpStatus.BLOCKED_BY_POLICY,
                                    "blocked by slice policy", host=host),
                        {"slice": "block"},
                    )
                if verdict is SliceAction.FAKE:
                    return finish(
                        HttpOutcome(HttpStatus.FAKE_UNREACHABLE,
                                    "faked by slice policy", host=host),
                        {"slice": "fake"},
                    )
                if verdict is SliceAction.PROMPT:
                    return self._suspend_on_prompt(
                        package, method, host, path, body, finish, on_outcome
                    )
                return finish(
                    self._resolve_and_deliver(package, method, host, path, body),
                    {"slice": "in-slice"},
                )
            return finish(self._resolve_and_deliver(package, method, host, path, body))

        if self.authorize_call(package, MEDIATED_HTTP_OP) == ALLOW:
            route = "proxy"
            if is_ip_literal(host):
                return finish(
                    HttpOutcome(HttpStatus.DENIED_NO_GRANT,
                                "IP-literal URLs name no user-tangible service",
                                host=host)
                )
            patterns = self._granted_patterns(package)
            matched = next((p for p in patterns if p.matches(host)), None)
            if matched is None:
                return finish(
                    HttpOutcome(HttpStatus.DENIED_NO_GRANT,
                                f"host {host!r} matches no granted domain pattern",
                                host=host)
                )
            return finish(
                self._resolve_and_deliver(package, method, host, path, body),
                {"matched": matched.normalized},
            )

        route = "none"
        return finish(
            HttpOutcome(HttpStatus.DENIED_NO_GRANT, "no network grant", host=host)
        )

    def _resolve_and_deliver(
        self, package: str, method: str, host: str, path: str, body: bytes
    ) -> HttpOutcome:
        try:
            address = self.dns.resolve(host, pin=self.pinning)
        except ResolutionFailure:
            return HttpOutcome(
                HttpStatus.FAKE_UNREACHABLE, "no address record", host=host
            )
        except PinMismatch as exc:
            return HttpOutcome(
                HttpStatus.DENIED_PIN_MISMATCH, str(exc), host=host
            )
        response = self.stub.handle(method, host, address, path, body)
        return HttpOutcome(
            HttpStatus.DELIVERED,
            "delivered to stub server",
            timing_ms=self.latency_ms,
            host=host,
            address=address,
            response_body=response,
        )

    def _suspend_on_prompt(
        self,
        package: str,
        method: str,
        host: str,
        path: str,
        body: bytes,
        finish: Callable,
        on_outcome: Optional[Callable[[HttpOutcome], None]],
    ) -> HttpOutcome:
        def resume(action: SliceAction) -> None:
            if action is SliceAction.ALLOW:
                outcome = self._resolve_and_deliver(package, method, host, path, body)
                extra = {"slice": "decided-allow"}
            elif action is SliceAction.BLOCK:
                outcome = HttpOutcome(
                    HttpStatus.BLOCKED_BY_POLICY, "blocked by operator", host=host
                )
                extra = {"slice": "decided-block"}
            else:
                outcome = HttpOutcome(
                    HttpStatus.FAKE_UNREACHABLE, "faked by operator", host=host
                )
                extra = {"slice": "decided-fake"}
            extra["pending_id"] = pending.id
            finish(outcome, extra)
            if on_outcome is not None:
                on_outcome(outcome)

        pending = self.firewall.enqueue(
            package, method, host, path, self.now, resume
        )
        self._log(
            package,
            "firewall-prompt",
            {"pending_id": pending.id, "method": method, "host": host, "path": path},
            "pending",
        )
        if self.on_pending is not None:
            self.on_pending(pending)
        return HttpOutcome(HttpStatus.PENDING, f"pending decision {pending.id}", host=host)

    # -- firewall control ------------------------------------------------------------

    def set_slice_policy(
        self, app: str, allowed_domains: list[str], default_action: str = "prompt"
    ) -> SlicePolicy:
        uid = self.grants.uid_of(app)
        if uid is None or not self.grants.holds(uid, env.INTERNET):
            raise NotALegacyAppError(
                f"{app!r} does not hold the native Internet grant; slicing "
                "applies only to legacy apps"
            )
        policy = SlicePolicy(
            app=app,
            allowed_domains=tuple(DomainPattern.parse(d) for d in allowed_domains),
            default_action=SliceAction(default_action),
        )
        self.firewall.set_policy(policy)
        self._log(
            "operator",
            "set-policy",
            {"app": app, "allowed": list(allowed_domains), "default": default_action},
            "ok",
        )
        return policy

    def decide_pending(self, decision_id: int, action: str) -> PendingDecision:
        pending = self.firewall.get(decision_id)
        if pending.resolution is not None:
            raise AlreadyResolvedError(f"decision {decision_id} already resolved")
        self._log(
            "operator",
            "firewall-decision",
            {"pending_id": decision_id, "decision": action},
            "ok",
        )
        return self.firewall.decide(decision_id, SliceAction(action))

    # -- DNS control -------------------------------------------------------------------

    def set_rogue_overlay(self, mapping: dict[str, str], active: bool) -> None:
        self.dns.set_rogue_overlay(mapping, active)
        self._log(
            "operator",
            "rogue-dns",
            {"mapping": dict(mapping), "active": active},
            "ok",
        )

    # -- filesystem ----------------------------------------------------------------------

    def assign_app_root(self, package: str) -> str:
        root = sandbox_root_for(package)
        self.fs.mkdir(root)
        self.sandboxes[package] = root
        return root

    def fs_access(self, package: str, path: str, op: str, payload: Optional[bytes] = None):
        """Mediated storage I/O. Returns the op result; raises FsError
        subclasses on denial (escapes surface as permission denied)."""
        params = {"path": path, "op": op}

        def denied(reason: str):
            self._log(package, "fs", params, "permission-denied")
            return FsPermissionDenied(reason)

        if self.authorize_call(package, "fs.sdcard") == ALLOW:
            # legacy full-SD-card grant: confined to the card, not a folder
            try:
                canonical = canonicalize(SDCARD_ROOT, path)
            except Exception as exc:
                raise denied(str(exc)) from None
        elif self.authorize_call(package, MEDIATED_FS_OP) == ALLOW:
            root = self.sandboxes.get(package) or self.assign_app_root(package)
            try:
                canonical = canonicalize(root, path)
            except Exception as exc:
                raise denied(str(exc)) from None
        else:
            raise denied(f"{package!r} holds no storage grant")

        params["canonical"] = canonical
        try:
            if op == "read":
                result = self.fs.read(canonical)
            elif op == "write":
                self.fs.write(canonical, payload or b"")
                result = None
            elif op == "mkdir":
                self.fs.mkdir(canonical)
                result = None
            elif op == "list":
                result = self.fs.listdir(canonical)
            elif op == "delete":
                self.fs.delete(canonical)
                result = None
            else:
                raise ValueError(f"unknown fs op {op!r}")
        except FsNotFound:
            self._log(package, "fs", params, "not-found")
            raise
        except Exception:
            self._log(package, "fs", params, "error")
            raise
        self._log(package, "fs", params, "ok")
        return result

    # -- usage statistics ---------------------------------------------------------------

    def _stats_proxy_package(self) -> Optional[str]:
        for proxy_id in self.store.installed:
            if STATS_REPORT_OP in self.store.get(proxy_id).api_surface:
                return proxy_id
        return None

    def report_stat(self, package: str, event: str) -> str:
        if self.authorize_call(package, STATS_REPORT_OP) != ALLOW:
            self._log(package, "stat-report", {"event": event}, "denied")
            return "denied"
        self.stats.append(package, event, self.now)
        self._log(package, "stat-report", {"event": event}, "buffered")
        if self.network.connected:
            self.flush_stats()
        return "buffered"

    def flush_stats(self) -> int:
        """Deliver buffered entries in order through the network pipeline,
        as the statistics proxy, while connected."""
        if not self.network.connected:
            return 0
        proxy_pkg = self._stats_proxy_package()
        if proxy_pkg is None:
            return 0
        delivered = 0
        requeue = []
        for entry in self.stats.drain():
            body = json.dumps(
                {"app": entry.app, "event": entry.event, "t": entry.t},
                sort_keys=True,
            ).encode()
            outcome = self.http_request(
                proxy_pkg,
                "POST",
                f"http://{ANALYTICS_HOST}/collect",
                body,
                stat_meta={"stat_app": entry.app, "stat_event": entry.event},
            )
            if outcome.status is HttpStatus.DELIVERED:
                delivered += 1
                self.stats.flushed += 1
            else:
                requeue.append(entry)
        self.stats.entries = requeue + self.stats.entries
        return delivered

    def set_network_state(self, connected: bool) -> None:
        was = self.network.connected
        self.network.connected = connected
        self._log("operator", "network-state", {"connected": connected}, "ok")
        if connected and not was:
            self.flush_stats()

    # -- phone sessions --------------------------------------------------------------------

    def _phone_proxy_package(self) -> str:
        for proxy_id in self.store.installed:
            if PHONE_INCOMING_OP in self.store.get(proxy_id).api_surface:
                return proxy_id
        return "os"

    def incoming_call(self, package: str):
        if self.authorize_call(package, PHONE_INCOMING_OP) != ALLOW:
            self._log(package, "call-incoming", {}, "denied")
            return None
        session = self.phone.open_session(package)
        proxy_pkg = self._phone_proxy_package()
        # native events are emitted by the proxy on the app's behalf
        self._log(proxy_pkg, "device.wake_screen", {"session": session.id}, "ok")
        self._log(proxy_pkg, "device.ring", {"session": session.id}, "ok")
        self._log(package, "call-incoming", {"session": session.id}, "ringing")
        return session

    def answer_call(self, package: str, session_id: str):
        if self.authorize_call(package, PHONE_ANSWER_OP) != ALLOW:
            self._log(package, "call-answer", {"session": session_id}, "denied")
            return None
        session = self.phone.answer(package, session_id)
        self._log(package, "call-answer", {"session": session_id}, "connected")
        return session

    def issue_user_action(self, session_id: str):
        token = self.phone.issue_token(session_id, self.now)
        self._log("operator", "user-action", {"session": session_id, "token": token.id}, "ok")
        return token

    def start_mic_capture(self, package: str, session_id: str, token) -> str:
        proxy_pkg = self._phone_proxy_package()
        if self.authorize_call(package, PHONE_MIC_OP) != ALLOW:
            self._log(package, "mic-capture", {"session": session_id}, "denied")
            return "denied"
        try:
            self.phone.start_mic_capture(package, session_id, token)
        except Exception as exc:
            self._log(
                package,
                "mic-capture",
                {"session": session_id, "reason": type(exc).__name__},
                "denied",
            )
            return "denied"
        self._log(
            proxy_pkg,
            "audio.record",
            {"session": session_id, "app": package, "token": token.id},
            "capturing",
        )
        return "capturing"

    def use_bluetooth(self, package: str, session_id: str) -> str:
        proxy_pkg = self._phone_proxy_package()
        if self.authorize_call(package, PHONE_BT_OP) != ALLOW:
            self._log(package, "bluetooth", {"session": session_id}, "denied")
            return "denied"
        try:
            self.phone.use_bluetooth(package, session_id)
        except Exception:
            self._log(package, "bluetooth", {"session": session_id}, "denied")
            return "denied"
        self._log(
            proxy_pkg, "bluetooth.route", {"session": session_id, "app": package}, "routed"
        )
        return "routed"

    # -- snapshots ---------------------------------------------------------------------------

    def state_snapshot(self) -> dict:
        apps = []
        for pkg, inst in sorted(self.apps.items()):
            grants = []
            footprint = set()
            for perm_id, params in self.grants.grants_of(inst.uid):
                grants.append({"id": perm_id, "params": list(params) if params else None})
                footprint |= self.resolve_footprint(perm_id, params)
            apps.append(
                {
                    "package": pkg,
                    "uid": inst.uid,
                    "isProxy": inst.is_proxy,
                    "grants": grants,
                    "footprint": [
                        {"id": fid, "params": list(fp) if fp else None}
                        for fid, fp in sorted(
                            footprint, key=lambda e: (e[0], e[1] or ())
                        )
                    ],
                }
            )
        policies = [
            {
                "app": p.app,
                "allowedDomains": [d.normalized for d in p.allowed_domains],
                "defaultAction": p.default_action.value,
            }
            for p in self.firewall.policies.values()
        ]
        return {
            "apps": apps,
            "policies": policies,
            "network": {"connected": self.network.connected},
            "stats": {"buffered": len(self.stats.entries), "flushed": self.stats.flushed},
            "pendingCount": len(self.firewall.unresolved()),
            "simTime": self.now,
        }
