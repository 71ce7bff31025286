# Copyright (C) 2025  The dqrng developers
#
# This library is free software; you can redistribute it and/or modify it under
# the terms of the GNU Lesser General Public License as published by the Free
# Software Foundation; either version 2.1 of the License, or (at your option)
# any later version.
#
# This library is distributed in the hope that it will be useful, but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
# FOR A PARTICULAR PURPOSE.  See the GNU Lesser General Public License for more
# details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with this library; if not, write to the Free Software Foundation, Inc.,
# 51 Franklin Street, Fifth Floor, Boston, MA  02110-1301 USA
"""
The third party verifier service.

A device opens a session, streams the public sequence and asks for a verdict.
The verifier runs the battery selected by the agreed criteria on the received
bits and answers with the verdict and the full test report.  Auditors retrieve
committed audit streams, readers fetch stored verdicts.

Each connection is one session and is served by its own thread.  The number of
concurrent sessions is capped.
"""
import hmac
import logging
import socketserver
import threading
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Mapping
from typing import Optional
from typing import Tuple
from typing import Union

from dqrng import config
from dqrng.battery import TestReport
from dqrng.battery import check_length
from dqrng.battery import run_battery
from dqrng.enums import MessageType
from dqrng.enums import Phase
from dqrng.enums import Role
from dqrng.enums import SessionEvent
from dqrng.enums import Verdict
from dqrng.exceptions import AuthorizationError
from dqrng.exceptions import DQRNGError
from dqrng.exceptions import IncompleteStreamError
from dqrng.exceptions import ParameterDomainError
from dqrng.exceptions import ProtocolError
from dqrng.protocol import BitStreamAssembler
from dqrng.protocol import Frame
from dqrng.protocol import SessionState
from dqrng.protocol import bit_frames
from dqrng.protocol import error_code
from dqrng.protocol import error_frame
from dqrng.protocol import json_frame
from dqrng.protocol import read_frame
from dqrng.registry import Criteria
from dqrng.registry import CriteriaRegistry
from dqrng.registry import registry as default_registry
from dqrng.store import SessionStore
from dqrng.types import Connection

__all__ = [
    "VerifierConfig",
    "VerifierServer",
    "judge",
    "parse_tokens",
    "serve",
    "verdict_document",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerifierConfig:
    """Settings of a verifier service."""

    storage: Path
    tokens: Mapping[Role, str]
    host: str = "127.0.0.1"
    port: int = config.DEFAULT_PORT
    max_sessions: int = config.MAX_SESSIONS
    timeout: float = config.SESSION_TIMEOUT
    workers: int = 1
    criteria: Tuple[Criteria, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        """Check the settings."""
        if self.max_sessions < 1:
            msg = f"At least one session must be allowed, got {self.max_sessions}"
            raise ParameterDomainError(msg)
        if not 0 <= self.port < 2**16:
            msg = f"Invalid port {self.port}"
            raise ParameterDomainError(msg)


def judge(report: TestReport, criteria: Criteria) -> Verdict:
    """Return the verdict of a report under the given criteria."""
    passed = report.passed(require_uniformity=criteria.require_uniformity)
    return Verdict.passed if passed else Verdict.failed


def verdict_document(state: SessionState, report: TestReport) -> Dict[str, Any]:
    """Return the JSON document of a VERDICT frame."""
    return {
        "session_id": state.session_id,
        "criteria_id": state.criteria_id,
        "verdict": None if state.verdict is None else state.verdict.value,
        "bit_count": state.received_len,
        "report": report.to_dict(),
    }


class SessionHandler(socketserver.BaseRequestHandler):
    """Serve one connection."""

    server: "VerifierServer"

    def send(self, frame: Frame) -> None:
        self.request.sendall(frame.encode())

    def handle(self) -> None:
        conn: Connection = self.request
        conn.settimeout(self.server.config.timeout)
        if not self.server.slots.acquire(blocking=False):
            logger.warning("Session limit reached, refusing %s", self.client_address)
            self._send_error(error_frame("busy", "too many sessions"))
            return
        try:
            self._dispatch(conn)
        except DQRNGError as error:
            logger.warning("Session from %s aborted: %s", self.client_address, error)
            self._send_error(error_frame(error_code(error), str(error)))
        except OSError as error:
            logger.warning("Connection to %s failed: %s", self.client_address, error)
        finally:
            self.server.slots.release()

    def _send_error(self, frame: Frame) -> None:
        try:
            self.send(frame)
        except OSError:
            logger.debug("Could not deliver error frame to %s", self.client_address)

    def _authenticate(self, document: Dict[str, Any], *allowed: Role) -> Role:
        try:
            role = Role(str(document.get("role")))
        except ValueError as error:
            msg = f"Unknown role {document.get('role')!r}"
            raise AuthorizationError(msg) from error
        expected = self.server.config.tokens.get(role)
        token = str(document.get("token", ""))
        if expected is None or not hmac.compare_digest(token, expected):
            msg = f"Invalid credentials for role {role.value}"
            raise AuthorizationError(msg)
        if role not in allowed:
            msg = f"Role {role.value} may not perform this action"
            raise AuthorizationError(msg)
        return role

    def _dispatch(self, conn: Connection) -> None:
        frame = read_frame(conn)
        if frame is None:
            return
        if frame.message_type != MessageType.SESSION_START:
            msg = f"Expected SESSION_START, got {frame.message_type.name}"
            raise ProtocolError(msg)
        document = frame.json()
        action = document.get("action", "submit")
        if action == "submit":
            self._authenticate(document, Role.device)
            self._submit(conn, document)
        elif action == "audit_retrieve":
            self._authenticate(document, Role.auditor)
            self._send_audit(str(document.get("session_id")))
        elif action == "fetch_verdict":
            self._authenticate(document, Role.reader, Role.auditor, Role.device)
            self._send_verdict(str(document.get("session_id")))
        else:
            msg = f"Unknown action {action!r}"
            raise ProtocolError(msg)

    def _submit(self, conn: Connection, document: Dict[str, Any]) -> None:
        store = self.server.store
        criteria = self.server.registry.get(str(document.get("criteria_id")))
        try:
            declared_len = int(document["declared_len"])
        except (KeyError, TypeError, ValueError) as error:
            msg = "SESSION_START needs an integer declared_len"
            raise ProtocolError(msg) from error
        if declared_len < 1:
            msg = f"Declared length must be positive, got {declared_len}"
            raise ProtocolError(msg)
        check_length(declared_len, criteria)
        state = SessionState(
            declared_len=declared_len,
            criteria_id=criteria.criteria_id,
            has_audit=bool(document.get("has_audit", False)),
        )
        store.record(state)
        logger.info(
            "Session %s opened: %d bits, criteria %r",
            state.session_id,
            declared_len,
            criteria.criteria_id,
        )
        ack = {"session_id": state.session_id}
        self.send(json_frame(MessageType.SESSION_START, ack))
        try:
            self._stream(conn, state, criteria)
        except (DQRNGError, OSError) as error:
            if state.phase < Phase.VERDICT:
                state.abort(str(error))
                store.record(state)
            raise

    def _stream(
        self,
        conn: Connection,
        state: SessionState,
        criteria: Criteria,
    ) -> None:
        store = self.server.store
        data = BitStreamAssembler(state.declared_len)
        audit = BitStreamAssembler(state.declared_len) if state.has_audit else None
        while True:
            frame = read_frame(conn)
            if frame is None:
                msg = (
                    f"incomplete stream: connection closed after {data.received_len} "
                    f"of {state.declared_len} bits"
                )
                raise IncompleteStreamError(msg)
            if frame.message_type == MessageType.DATA:
                data.feed(frame.payload)
                before = state.phase
                state.apply(SessionEvent.data)
                state.received_len = data.received_len
                if state.phase != before:
                    store.record(state)
            elif frame.message_type == MessageType.AUDIT_DATA:
                if audit is None:
                    msg = "Audit data in a session opened without audit"
                    raise ProtocolError(msg)
                audit.feed(frame.payload)
            elif frame.message_type == MessageType.VERIFY_REQUEST:
                if not data.complete or (audit is not None and not audit.complete):
                    msg = (
                        f"incomplete stream: {data.received_len} of "
                        f"{state.declared_len} bits received"
                    )
                    raise IncompleteStreamError(msg)
                self._verify(state, criteria, data, audit)
                return
            else:
                msg = f"Unexpected {frame.message_type.name} frame while streaming"
                raise ProtocolError(msg)

    def _verify(
        self,
        state: SessionState,
        criteria: Criteria,
        data: BitStreamAssembler,
        audit: Optional[BitStreamAssembler],
    ) -> None:
        store = self.server.store
        bits = data.bits
        state.apply(SessionEvent.complete)
        store.record(state, bits=bits)
        if audit is not None:
            store.record_audit(state.session_id, audit.bits)
        report = run_battery(bits, criteria, workers=self.server.config.workers)
        state.verdict = judge(report, criteria)
        state.apply(SessionEvent.verdict)
        store.record(state, report=report)
        logger.info("Session %s verdict: %s", state.session_id, state.verdict.value)
        self.send(json_frame(MessageType.VERDICT, verdict_document(state, report)))
        state.apply(SessionEvent.close)
        store.record(state)

    def _send_audit(self, session_id: str) -> None:
        record = self.server.store.audit(session_id)
        header = {
            "session_id": session_id,
            "bit_count": len(record.bits),
            "retained_at": record.retained_at.isoformat(),
        }
        self.send(json_frame(MessageType.SESSION_START, header))
        for frame in bit_frames(MessageType.AUDIT_DATA, record.bits):
            self.send(frame)
        logger.info("Audit stream of session %s delivered", session_id)

    def _send_verdict(self, session_id: str) -> None:
        store = self.server.store
        state = store.session(session_id)
        report = store.report(session_id)
        self.send(json_frame(MessageType.VERDICT, verdict_document(state, report)))


class VerifierServer(socketserver.ThreadingTCPServer):
    """Threaded TCP verifier service."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        config: VerifierConfig,
        registry: Optional[CriteriaRegistry] = None,
    ) -> None:
        """Bind the service, storage is opened immediately."""
        self.config = config
        self.registry = (registry or default_registry).copy()
        for criteria in config.criteria:
            self.registry.register(criteria)
        self.store = SessionStore(config.storage)
        self.slots = threading.BoundedSemaphore(config.max_sessions)
        self._thread: Optional[threading.Thread] = None
        super().__init__((config.host, config.port), SessionHandler)

    def __repr__(self) -> str:
        """Create a string (c)representation for VerifierServer."""
        return (
            f"{self.__class__.__module__}.{self.__class__.__name__}("
            f"config={self.config!r}, "
            ")"
        )

    @property
    def address(self) -> Tuple[str, int]:
        """Return the address the service listens on."""
        host, port = self.server_address[:2]
        return str(host), int(port)

    def start(self) -> threading.Thread:
        """Serve in a background thread."""
        self._thread = threading.Thread(
            target=self.serve_forever,
            name=f"verifier-{self.address[1]}",
            daemon=True,
        )
        self._thread.start()
        logger.info("Verifier listening on %s:%d", *self.address)
        return self._thread

    def stop(self) -> None:
        """Stop serving and close the socket."""
        if self._thread is not None:
            self.shutdown()
            self._thread.join()
            self._thread = None
        self.server_close()

    def __exit__(self, *args: object) -> None:
        """Stop serving."""
        self.stop()


def serve(
    config: VerifierConfig,
    registry: Optional[CriteriaRegistry] = None,
) -> None:
    """Run the verifier in the foreground until interrupted."""
    with VerifierServer(config, registry) as server:
        logger.info("Verifier listening on %s:%d", *server.address)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            logger.info("Verifier stopped")


def parse_tokens(tokens: Mapping[Union[Role, str], str]) -> Dict[Role, str]:
    """Return role tokens keyed by `Role`."""
    return {
        Role(str(getattr(role, "value", role))): token
        for role, token in tokens.items()
    }
