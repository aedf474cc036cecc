"""Scenario files, the deterministic run loop, and the log auditor.

A scenario is fully self-contained: fixtures (DNS seed, FS seed, pinning
mode), app manifests with scripted actions, a scripted operator, and final
assertions. App scripts interleave round-robin at action granularity; a
firewall prompt parks one script without blocking the others.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Optional

from .devices import ANALYTICS_DESTINATION
from .domains import DomainPattern
from .errors import (
    FsError,
    FsNotFound,
    FsPermissionDenied,
    PermeshError,
    ScenarioParseError,
    UnscriptedPromptError,
)
from .netsim import DnsTable, HttpOutcome, HttpStatus
from .permissions import AppManifest
from .proxies import ProxyDescriptor
from .simulator import Simulator
from .vfs import VirtualFS

_SCRIPT_VERBS = {
    "http": {"method", "url", "body", "expect"},
    "raw-socket": {"address", "expect"},
    "fs": {"op", "path", "data", "expect", "expect-data"},
    "report-stat": {"event", "expect"},
    "incoming-call": {"expect"},
    "answer-call": {"expect"},
    "mic-capture": {"expect"},
    "bluetooth": {"expect"},
}

_OPERATOR_OPS = {
    "network": {"connected", "at"},
    "decide": {"verdict", "at"},
    "user-action": {"app", "at"},
    "rogue-dns": {"mapping", "active", "at"},
    "policy": {"app", "allowed", "default", "at"},
}

_ASSERT_KINDS = {
    "event": {"match", "count", "min"},
    "no-event": {"match"},
    "stats": {"buffered", "flushed"},
    "app-status": {"app", "status"},
    "fs-exists": {"path", "content"},
}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioParseError(f"unknown field(s) {sorted(unknown)} in {where}")


@dataclass
class ScenarioApp:
    manifest: AppManifest
    script: list[dict]


@dataclass
class Scenario:
    name: str
    dns_seed: dict[str, str]
    fs_seed: dict
    pinning: bool
    latency_ms: float
    tick_ms: float
    extra_proxies: list[ProxyDescriptor]
    apps: list[ScenarioApp]
    operator: list[dict]
    final_asserts: list[dict]


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    _reject_unknown(
        data, {"name", "fixtures", "apps", "operator", "assert"}, "scenario"
    )
    fixtures = data.get("fixtures", {})
    _reject_unknown(
        fixtures,
        {"dns", "fs", "pinning", "latency_ms", "tick_ms", "proxies"},
        "fixtures",
    )
    extra_proxies = [ProxyDescriptor.from_dict(p) for p in fixtures.get("proxies", [])]
    apps = []
    for i, entry in enumerate(data.get("apps", [])):
        _reject_unknown(entry, {"manifest", "script"}, f"apps[{i}]")
        if "manifest" not in entry:
            raise ScenarioParseError(f"apps[{i}] is missing its manifest")
        manifest = AppManifest.from_dict(entry["manifest"])
        script = list(entry.get("script", []))
        for j, action in enumerate(script):
            verb = action.get("do")
            if verb not in _SCRIPT_VERBS:
                raise ScenarioParseError(
                    f"unknown action verb {verb!r} in apps[{i}].script[{j}]"
                )
            _reject_unknown(
                action, _SCRIPT_VERBS[verb] | {"do"}, f"apps[{i}].script[{j}]"
            )
        apps.append(ScenarioApp(manifest=manifest, script=script))
    operator = list(data.get("operator", []))
    for k, op in enumerate(operator):
        kind = op.get("op")
        if kind not in _OPERATOR_OPS:
            raise ScenarioParseError(f"unknown operator op {kind!r} in operator[{k}]")
        _reject_unknown(op, _OPERATOR_OPS[kind] | {"op"}, f"operator[{k}]")
    final_asserts = list(data.get("assert", []))
    for k, a in enumerate(final_asserts):
        kind = a.get("kind")
        if kind not in _ASSERT_KINDS:
            raise ScenarioParseError(f"unknown assertion kind {kind!r} in assert[{k}]")
        _reject_unknown(a, _ASSERT_KINDS[kind] | {"kind"}, f"assert[{k}]")
    return Scenario(
        name=data.get("name", ""),
        dns_seed=dict(fixtures.get("dns", {})),
        fs_seed=dict(fixtures.get("fs", {})),
        pinning=bool(fixtures.get("pinning", True)),
        latency_ms=float(fixtures.get("latency_ms", 1.0)),
        tick_ms=float(fixtures.get("tick_ms", 1.0)),
        extra_proxies=extra_proxies,
        apps=apps,
        operator=operator,
        final_asserts=final_asserts,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ScenarioParseError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_scenario(data)


@dataclass
class Report:
    passed: bool
    failures: list[str]
    app_statuses: dict[str, str]
    log_ndjson: str
    assertion_results: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": self.failures,
            "appStatuses": self.app_statuses,
            "assertions": self.assertion_results,
        }


class _AppRunner:
    def __init__(self, package: str, script: list[dict]):
        self.package = package
        self.script = script
        self.index = 0
        self.status = "running" if script else "finished"
        self.failure: Optional[str] = None
        self.resumed_outcome: Optional[HttpOutcome] = None
        self.suspended_action: Optional[dict] = None

    def fail(self, message: str) -> None:
        self.status = "failed"
        self.failure = message


class ScenarioRunner:
    """Drives one scenario to completion on a fresh simulator."""

    def __init__(self, scenario: Scenario, tick_ms: Optional[float] = None,
                 interactive: bool = False):
        self.scenario = scenario
        self.interactive = interactive
        self.sim = Simulator(
            dns=DnsTable.from_seed(scenario.dns_seed),
            fs=VirtualFS.load(scenario.fs_seed) if scenario.fs_seed else None,
            pinning=scenario.pinning,
            latency_ms=scenario.latency_ms,
            tick_ms=tick_ms if tick_ms is not None else scenario.tick_ms,
        )
        self.sim.seed_standard()
        for descriptor in scenario.extra_proxies:
            self.sim.store.register(descriptor)
        self.runners: list[_AppRunner] = []
        self.operator_queue: list[dict] = list(scenario.operator)
        self.step = 0
        self.failures: list[str] = []
        self.wakeup = threading.Condition(self.sim.lock)
        self.finished = False

    # -- operator script -------------------------------------------------------

    def _operator_eligible(self, op: dict) -> bool:
        if op.get("at", 0) > self.step:
            return False
        if op["op"] == "decide":
            return bool(self.sim.firewall.unresolved())
        return True

    def _run_operator(self, op: dict) -> None:
        kind = op["op"]
        if kind == "network":
            self.sim.set_network_state(bool(op["connected"]))
        elif kind == "decide":
            pending = self.sim.firewall.unresolved()[0]
            self.sim.decide_pending(pending.id, op["verdict"])
        elif kind == "user-action":
            session = self.sim.phone.latest_session(op["app"])
            if session is None:
                raise ScenarioParseError(
                    f"operator user-action for {op['app']!r} but no session exists"
                )
            self.sim.issue_user_action(session.id)
        elif kind == "rogue-dns":
            self.sim.set_rogue_overlay(dict(op["mapping"]), bool(op.get("active", True)))
        elif kind == "policy":
            self.sim.set_slice_policy(
                op["app"], list(op.get("allowed", [])), op.get("default", "prompt")
            )

    def _drain_operator(self) -> None:
        while self.operator_queue and self._operator_eligible(self.operator_queue[0]):
            self._run_operator(self.operator_queue.pop(0))

    # -- app actions ------------------------------------------------------------

    def _observe(self, runner: _AppRunner, action: dict) -> Optional[str]:
        """Execute one script action; returns the observed outcome name, or
        None if the app suspended on a firewall prompt."""
        sim = self.sim
        pkg = runner.package
        verb = action["do"]
        if verb == "http":
            def on_outcome(outcome: HttpOutcome) -> None:
                runner.resumed_outcome = outcome

            outcome = sim.http_request(
                pkg,
                action.get("method", "GET"),
                action["url"],
                action.get("body", "").encode(),
                on_outcome=on_outcome,
            )
            if outcome.status is HttpStatus.PENDING:
                return None
            return outcome.app_kind
        if verb == "raw-socket":
            return sim.open_raw_socket(pkg, action.get("address", "0.0.0.0"))
        if verb == "fs":
            try:
                result = sim.fs_access(
                    pkg,
                    action["path"],
                    action["op"],
                    action.get("data", "").encode() if "data" in action else None,
                )
            except FsPermissionDenied:
                return "permission-denied"
            except FsNotFound:
                return "not-found"
            except FsError:
                return "error"
            expected_data = action.get("expect-data")
            if expected_data is not None and result != expected_data.encode():
                runner.fail(
                    f"{pkg}: fs read of {action['path']!r} returned {result!r}, "
                    f"expected {expected_data!r}"
                )
            return "ok"
        if verb == "report-stat":
            return sim.report_stat(pkg, action.get("event", "event"))
        if verb == "incoming-call":
            session = sim.incoming_call(pkg)
            return "ringing" if session else "denied"
        if verb == "answer-call":
            session = sim.phone.latest_session(pkg)
            if session is None:
                return "denied"
            return "connected" if sim.answer_call(pkg, session.id) else "denied"
        if verb == "mic-capture":
            session = sim.phone.latest_session(pkg)
            if session is None:
                return "denied"
            token = sim.phone.fresh_token_for(pkg)
            return sim.start_mic_capture(pkg, session.id, token)
        if verb == "bluetooth":
            session = sim.phone.latest_session(pkg)
            if session is None:
                return "denied"
            return sim.use_bluetooth(pkg, session.id)
        raise ScenarioParseError(f"unknown action verb {verb!r}")

    def _check(self, runner: _AppRunner, action: dict, observed: str) -> None:
        expected = action.get("expect")
        if expected is not None and observed != expected:
            runner.fail(
                f"{runner.package}: action {runner.index} ({action['do']}) "
                f"observed {observed!r}, expected {expected!r}"
            )

    def _advance(self, runner: _AppRunner) -> None:
        runner.index += 1
        if runner.status == "running" and runner.index >= len(runner.script):
            runner.status = "finished"

    def _execute_one(self, runner: _AppRunner) -> None:
        action = runner.script[runner.index]
        observed = self._observe(runner, action)
        if observed is None:
            runner.status = "suspended"
            runner.suspended_action = action
            return
        if runner.status != "failed":
            self._check(runner, action, observed)
        if runner.status != "failed":
            self._advance(runner)

    def _resume_if_decided(self, runner: _AppRunner) -> None:
        if runner.resumed_outcome is None:
            return
        outcome, runner.resumed_outcome = runner.resumed_outcome, None
        action = runner.suspended_action or {}
        runner.suspended_action = None
        runner.status = "running"
        self._check(runner, action, outcome.app_kind)
        if runner.status != "failed":
            self._advance(runner)

    # -- main loop -----------------------------------------------------------------

    def run(self) -> Report:
        with self.sim.lock:
            return self._run_locked()

    def _run_locked(self) -> Report:
        for app in self.scenario.apps:
            try:
                self.sim.install_app(app.manifest)
            except PermeshError as exc:
                raise ScenarioParseError(
                    f"installing {app.manifest.package!r}: {exc}"
                ) from exc
            self.runners.append(_AppRunner(app.manifest.package, app.script))

        while True:
            self._drain_operator()
            progressed = False
            for runner in self.runners:
                if runner.status == "suspended":
                    self._resume_if_decided(runner)
                    if runner.status == "suspended":
                        continue
                    progressed = True
                if runner.status != "running":
                    continue
                self._execute_one(runner)
                self.step += 1
                self.sim.tick()
                progressed = True
                self._drain_operator()
            if progressed:
                continue
            # stalled: no app could act
            pendings = self.sim.firewall.unresolved()
            if self.operator_queue:
                head = self.operator_queue[0]
                if head.get("at", 0) > self.step:
                    self.step = head["at"]
                    continue
                if head["op"] == "decide" and not pendings:
                    self.failures.append(
                        "operator decision scripted but no prompt is pending"
                    )
                    break
                continue
            if pendings and any(r.status == "suspended" for r in self.runners):
                if self.interactive:
                    self.wakeup.wait(timeout=0.1)
                    continue
                raise UnscriptedPromptError(
                    f"{len(pendings)} firewall prompt(s) with no scripted decision"
                )
            break

        return self._finish()

    def _finish(self) -> Report:
        for runner in self.runners:
            if runner.failure:
                self.failures.append(runner.failure)
            elif runner.status not in ("finished",):
                self.failures.append(
                    f"{runner.package}: script did not finish (status {runner.status})"
                )
        self.failures.extend(audit_log(self.sim))
        assertion_results = []
        for a in self.scenario.final_asserts:
            ok, message = self._evaluate_assert(a)
            assertion_results.append({"assert": a, "ok": ok, "message": message})
            if not ok:
                self.failures.append(message)
        self.finished = True
        return Report(
            passed=not self.failures,
            failures=self.failures,
            app_statuses={r.package: r.status for r in self.runners},
            log_ndjson=self.sim.log.to_ndjson(),
            assertion_results=assertion_results,
        )

    def _evaluate_assert(self, a: dict) -> tuple[bool, str]:
        kind = a["kind"]
        if kind in ("event", "no-event"):
            matches = self.sim.log.find(**a.get("match", {}))
            if kind == "no-event":
                ok = not matches
                return ok, "" if ok else f"unexpected event matching {a['match']}"
            if "count" in a:
                ok = len(matches) == a["count"]
            elif "min" in a:
                ok = len(matches) >= a["min"]
            else:
                ok = bool(matches)
            return ok, "" if ok else f"event assertion failed: {a}"
        if kind == "stats":
            ok = True
            if "buffered" in a:
                ok = ok and len(self.sim.stats.entries) == a["buffered"]
            if "flushed" in a:
                ok = ok and self.sim.stats.flushed == a["flushed"]
            return ok, "" if ok else (
                f"stats assertion failed: buffered={len(self.sim.stats.entries)} "
                f"flushed={self.sim.stats.flushed}, expected {a}"
            )
        if kind == "app-status":
            status = next(
                (r.status for r in self.runners if r.package == a["app"]), "missing"
            )
            ok = status == a["status"]
            return ok, "" if ok else f"app {a['app']!r} status {status!r} != {a['status']!r}"
        if kind == "fs-exists":
            ok = self.sim.fs.exists(a["path"])
            if ok and "content" in a:
                ok = self.sim.fs.read(a["path"]) == a["content"].encode()
            return ok, "" if ok else f"fs assertion failed for {a['path']!r}"
        return False, f"unknown assertion kind {kind!r}"


def run_scenario(scenario: Scenario, tick_ms: Optional[float] = None) -> Report:
    return ScenarioRunner(scenario, tick_ms=tick_ms).run()


# Scenarios shipped with the package. The interactive ones leave firewall
# prompts to a live operator and therefore cannot run headless.
HEADLESS_SCENARIOS = [
    "weather-app",
    "rogue-dns-pinning-on",
    "rogue-dns-pinning-off",
    "slicing-fake",
    "slicing-block",
    "slicing-prompt",
    "stats-gating",
    "phone-call",
    "sdcard",
]
INTERACTIVE_SCENARIOS = ["interactive-slicing"]


def bundled_scenario_path(name: str) -> str:
    from importlib import resources

    return str(resources.files("permesh") / "data" / "scenarios" / f"{name}.json")


def audit_log(sim: Simulator) -> list[str]:
    """Re-derive enforcement invariants from the event log alone."""
    problems: list[str] = []
    last_seq = 0
    connected = False
    delivered_addr: dict[str, str] = {}
    tokens_issued: set[str] = set()
    tokens_consumed: list[str] = []
    stats_reported = 0
    stats_delivered = 0
    analytics = DomainPattern.parse(ANALYTICS_DESTINATION)

    for e in sim.log:
        if e.seq <= last_seq:
            problems.append(f"event log seq not strictly increasing at {e.seq}")
        last_seq = e.seq
        if e.action == "network-state":
            connected = bool(e.params.get("connected"))
        elif e.action == "user-action" and e.verdict == "ok":
            tokens_issued.add(e.params["token"])
        elif e.action == "audio.record" and e.verdict == "capturing":
            tokens_consumed.append(e.params.get("token", "?"))
        elif e.action == "stat-report" and e.verdict == "buffered":
            stats_reported += 1
        elif e.action == "http" and e.verdict == HttpStatus.DELIVERED.value:
            host = e.params["host"]
            address = e.params.get("address")
            if sim.pinning:
                pinned = sim.dns.pins.get(host)
                if pinned is not None and address != pinned:
                    problems.append(
                        f"delivery to {host} at {address}, but pin is {pinned}"
                    )
                prev = delivered_addr.setdefault(host, address)
                if prev != address:
                    problems.append(
                        f"deliveries to {host} at different addresses: {prev}, {address}"
                    )
            if "stat_event" in e.params:
                stats_delivered += 1
                if not analytics.matches(host):
                    problems.append(f"stats delivery to non-analytics host {host}")
                if not connected:
                    problems.append("stats delivery while disconnected")

    if len(tokens_consumed) != len(set(tokens_consumed)):
        problems.append("a user-action token was consumed more than once")
    if len(tokens_consumed) > len(tokens_issued):
        problems.append("more mic activations than user-action tokens issued")
    for token in tokens_consumed:
        if token not in tokens_issued:
            problems.append(f"mic activation with unknown token {token!r}")
    still_buffered = len(sim.stats.entries)
    if stats_reported != stats_delivered + still_buffered:
        problems.append(
            f"stats conservation broken: reported={stats_reported}, "
            f"delivered={stats_delivered}, buffered={still_buffered}"
        )
    return problems
