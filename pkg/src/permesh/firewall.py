"""User-controlled permission slicing over coarse legacy grants.

A slice policy narrows a legacy app's full Internet grant to a set of
allowed domains. Out-of-slice accesses either resolve immediately
(block/fake) or become pending decisions awaiting an operator verdict,
the way a personal firewall prompts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .domains import DomainPattern
from .errors import AlreadyResolvedError, UnknownDecisionError


class SliceAction(str, Enum):
    PROMPT = "prompt"
    BLOCK = "block"
    FAKE = "fake"
    ALLOW = "allow"  # valid as a decision, not as a default action


@dataclass(frozen=True)
class SlicePolicy:
    app: str
    allowed_domains: tuple[DomainPattern, ...]
    default_action: SliceAction = SliceAction.PROMPT

    def covers(self, host: str) -> bool:
        return any(p.matches(host) for p in self.allowed_domains)


@dataclass
class PendingDecision:
    id: int
    app: str
    method: str
    host: str
    path: str
    created_at: float
    resolution: Optional[SliceAction] = None


class Firewall:
    """Slice policies plus the pending-decision queue."""

    def __init__(self):
        self.policies: dict[str, SlicePolicy] = {}
        self._pending: dict[int, PendingDecision] = {}
        self._next_id = 1
        # id -> callback run when the decision lands; set by the runtime
        self._resumptions: dict[int, Callable[[SliceAction], None]] = {}

    def set_policy(self, policy: SlicePolicy) -> None:
        self.policies[policy.app] = policy

    def policy_for(self, app: str) -> Optional[SlicePolicy]:
        return self.policies.get(app)

    def evaluate(self, app: str, host: str) -> SliceAction:
        """Verdict for one access under the app's policy; PROMPT means a
        pending decision must be enqueued by the caller."""
        policy = self.policies[app]
        if policy.covers(host):
            return SliceAction.ALLOW
        return policy.default_action

    def enqueue(
        self,
        app: str,
        method: str,
        host: str,
        path: str,
        created_at: float,
        on_decision: Callable[[SliceAction], None],
    ) -> PendingDecision:
        pending = PendingDecision(
            id=self._next_id,
            app=app,
            method=method,
            host=host,
            path=path,
            created_at=created_at,
        )
        self._next_id += 1
        self._pending[pending.id] = pending
        self._resumptions[pending.id] = on_decision
        return pending

    def unresolved(self) -> list[PendingDecision]:
        return [p for p in self._pending.values() if p.resolution is None]

    def get(self, decision_id: int) -> PendingDecision:
        try:
            return self._pending[decision_id]
        except KeyError:
            raise UnknownDecisionError(f"no pending decision {decision_id}") from None

    def decide(self, decision_id: int, action: SliceAction) -> PendingDecision:
        if action is SliceAction.PROMPT:
            raise ValueError("a decision must be allow, block, or fake")
        pending = self.get(decision_id)
        if pending.resolution is not None:
            raise AlreadyResolvedError(f"decision {decision_id} already resolved")
        pending.resolution = action
        resume = self._resumptions.pop(pending.id, None)
        if resume is not None:
            resume(action)
        return pending
