"""State behind the two merge proxies: buffered usage statistics gated on
network connectivity, and phone-call sessions with the explicit-user-action
microphone rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import InvalidSessionError, TokenReplayError, WrongSessionTokenError

ANALYTICS_DESTINATION = "*.google-analytics.com"
ANALYTICS_HOST = "ssl.google-analytics.com"


@dataclass(frozen=True)
class StatEntry:
    app: str
    event: str
    t: float


@dataclass
class StatsBuffer:
    entries: list[StatEntry] = field(default_factory=list)
    flushed: int = 0
    destination: str = ANALYTICS_DESTINATION

    def append(self, app: str, event: str, t: float) -> StatEntry:
        entry = StatEntry(app, event, t)
        self.entries.append(entry)
        return entry

    def drain(self) -> list[StatEntry]:
        """Remove and return everything buffered, in order."""
        out, self.entries = self.entries, []
        return out


@dataclass
class NetworkState:
    connected: bool = False


class CallState(str, Enum):
    RINGING = "ringing"
    CONNECTED = "connected"
    ENDED = "ended"


@dataclass
class PhoneSession:
    id: str
    app: str
    state: CallState = CallState.RINGING
    mic_active: bool = False
    bluetooth_active: bool = False


@dataclass
class UserActionToken:
    id: str
    session: str
    issued_at: float
    consumed: bool = False


class PhoneService:
    def __init__(self):
        self.sessions: dict[str, PhoneSession] = {}
        self.tokens: dict[str, UserActionToken] = {}
        self._session_n = 0
        self._token_n = 0

    def open_session(self, app: str) -> PhoneSession:
        self._session_n += 1
        session = PhoneSession(id=f"call-{self._session_n}", app=app)
        self.sessions[session.id] = session
        return session

    def session_of(self, app: str, session_id: str) -> PhoneSession:
        session = self.sessions.get(session_id)
        if session is None or session.app != app:
            raise InvalidSessionError(f"no session {session_id!r} for {app!r}")
        return session

    def latest_session(self, app: str) -> Optional[PhoneSession]:
        for session in reversed(list(self.sessions.values())):
            if session.app == app:
                return session
        return None

    def issue_token(self, session_id: str, t: float) -> UserActionToken:
        """Mint a single-use token for one explicit user tap. Only the
        operator channel calls this; apps cannot."""
        if session_id not in self.sessions:
            raise InvalidSessionError(f"no session {session_id!r}")
        self._token_n += 1
        token = UserActionToken(id=f"tap-{self._token_n}", session=session_id, issued_at=t)
        self.tokens[token.id] = token
        return token

    def answer(self, app: str, session_id: str) -> PhoneSession:
        session = self.session_of(app, session_id)
        session.state = CallState.CONNECTED
        return session

    def start_mic_capture(self, app: str, session_id: str, token: Optional[UserActionToken]) -> PhoneSession:
        session = self.session_of(app, session_id)
        if session.state is not CallState.CONNECTED:
            raise InvalidSessionError(f"session {session_id!r} is not connected")
        if token is None:
            raise WrongSessionTokenError("microphone requires an explicit user action")
        if token.consumed:
            raise TokenReplayError(f"token {token.id!r} already consumed")
        if token.session != session_id:
            raise WrongSessionTokenError(f"token {token.id!r} belongs to another session")
        token.consumed = True
        session.mic_active = True
        return session

    def use_bluetooth(self, app: str, session_id: str) -> PhoneSession:
        session = self.session_of(app, session_id)
        if session.state is not CallState.CONNECTED:
            raise InvalidSessionError(f"session {session_id!r} is not connected")
        session.bluetooth_active = True
        return session

    def fresh_token_for(self, app: str) -> Optional[UserActionToken]:
        """Oldest unconsumed token for any of the app's sessions."""
        for token in self.tokens.values():
            if token.consumed:
                continue
            session = self.sessions.get(token.session)
            if session is not None and session.app == app:
                return token
        return None
