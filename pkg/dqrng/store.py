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
Persistent session store of the verifier.

Two kinds of data are kept below the storage directory:

- ``sessions.jsonl``, an append-only log.  Every line is one JSON entry with a
  UTC timestamp, the SHA-256 of the previous entry and its own hash, so later
  tampering breaks the chain.
- ``blobs/``, content addressed files: submitted bits as packed bit files and
  test reports as JSON, named by the SHA-256 of their content.

The in-memory index is rebuilt from the log on start, the log is the only
source of truth.
"""
import hashlib
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple
from typing import Union

import arrow
from bitarray import bitarray

from dqrng.battery import TestReport
from dqrng.battery import run_battery
from dqrng.exceptions import FormatError
from dqrng.exceptions import NotFoundError
from dqrng.files import decode_bits
from dqrng.files import encode_bits
from dqrng.protocol import SessionState
from dqrng.registry import CriteriaRegistry
from dqrng.registry import registry as default_registry

__all__ = ["AuditRecord", "SessionStore"]

logger = logging.getLogger(__name__)

GENESIS = "0" * 64


@dataclass(frozen=True)
class AuditRecord:
    """Audit stream committed for a session."""

    session_id: str
    bits: bitarray
    retained_at: arrow.Arrow


def _entry_hash(entry: Dict[str, Any]) -> str:
    text = json.dumps(entry, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class SessionStore:
    """Append-only session log with content addressed blobs."""

    def __init__(self, root: Union[str, Path]) -> None:
        """Open or create the store below ``root``."""
        self.root = Path(root)
        self.blob_dir = self.root / "blobs"
        self.log_path = self.root / "sessions.jsonl"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._last_hash = GENESIS
        self._sessions: Dict[str, SessionState] = {}
        self._bits: Dict[str, str] = {}
        self._audits: Dict[str, Tuple[str, str]] = {}
        self._load()

    def __repr__(self) -> str:
        """Create a string (c)representation for SessionStore."""
        return f"{self.__class__.__module__}.{self.__class__.__name__}({self.root!r})"

    def _load(self) -> None:
        if not self.log_path.exists():
            return
        for entry in self.entries():
            self._index(entry)
            self._last_hash = entry["hash"]
        logger.info("Loaded %d sessions from %s", len(self._sessions), self.log_path)

    def _index(self, entry: Dict[str, Any]) -> None:
        data = entry["data"]
        session_id = entry["session_id"]
        if entry["kind"] == "state":
            self._sessions[session_id] = SessionState.from_dict(data["state"])
            if data.get("bits_digest"):
                self._bits[session_id] = data["bits_digest"]
        elif entry["kind"] == "audit":
            self._audits[session_id] = (data["audit_digest"], entry["timestamp"])

    def entries(self) -> List[Dict[str, Any]]:
        """
        Return all log entries in order.

        Raises
        ------
        FormatError
            If a line is not valid JSON.

        """
        if not self.log_path.exists():
            return []
        lines = self.log_path.read_text(encoding="utf-8").splitlines()
        try:
            return [json.loads(line) for line in lines if line.strip()]
        except ValueError as error:
            msg = f"Corrupt session log {self.log_path}: {error}"
            raise FormatError(msg) from error

    def _append(self, kind: str, session_id: str, data: Dict[str, Any]) -> str:
        with self._lock:
            entry: Dict[str, Any] = {
                "kind": kind,
                "session_id": session_id,
                "timestamp": arrow.utcnow().isoformat(),
                "data": data,
                "prev_hash": self._last_hash,
            }
            entry["hash"] = _entry_hash(entry)
            with self.log_path.open("a", encoding="utf-8") as stream:
                stream.write(json.dumps(entry, sort_keys=True) + "\n")
                stream.flush()
                os.fsync(stream.fileno())
            self._last_hash = entry["hash"]
            self._index(entry)
            return str(entry["hash"])

    def _put_blob(self, content: bytes, suffix: str) -> str:
        digest = hashlib.sha256(content).hexdigest()
        path = self.blob_dir / f"{digest}{suffix}"
        if not path.exists():
            partial = path.with_name(f"{path.name}.{threading.get_ident()}.tmp")
            partial.write_bytes(content)
            os.replace(partial, path)
        return digest

    def _get_blob(self, digest: str, suffix: str) -> bytes:
        path = self.blob_dir / f"{digest}{suffix}"
        try:
            content = path.read_bytes()
        except FileNotFoundError as error:
            msg = f"Blob {digest} is missing"
            raise NotFoundError(msg) from error
        if hashlib.sha256(content).hexdigest() != digest:
            msg = f"Blob {digest} does not match its digest"
            raise FormatError(msg)
        return content

    def record(
        self,
        state: SessionState,
        *,
        bits: Optional[bitarray] = None,
        report: Optional[TestReport] = None,
    ) -> str:
        """
        Persist a snapshot of a session, optionally with its bits and report.

        Returns the hash of the log entry.
        """
        data: Dict[str, Any] = {}
        if bits is not None:
            data["bits_digest"] = self._put_blob(encode_bits(bits), ".bits")
        if report is not None:
            state.report_digest = self._put_blob(
                report.to_json().encode("utf-8"),
                ".json",
            )
        data["state"] = state.to_dict()
        return self._append("state", state.session_id, data)

    def record_audit(self, session_id: str, bits: bitarray) -> AuditRecord:
        """Persist the audit stream of a session."""
        digest = self._put_blob(encode_bits(bits), ".bits")
        self._append("audit", session_id, {"audit_digest": digest, "bits": len(bits)})
        return self.audit(session_id)

    def session(self, session_id: str) -> SessionState:
        """Return the last recorded state of a session."""
        try:
            return self._sessions[session_id]
        except KeyError as error:
            msg = f"Unknown session {session_id}"
            raise NotFoundError(msg) from error

    def sessions(self) -> List[SessionState]:
        """Return the last recorded state of every session."""
        return list(self._sessions.values())

    def bits(self, session_id: str) -> bitarray:
        """Return the stored public sequence of a session."""
        self.session(session_id)
        if session_id not in self._bits:
            msg = f"Session {session_id} has no stored bits"
            raise NotFoundError(msg)
        return decode_bits(self._get_blob(self._bits[session_id], ".bits"))

    def report(self, session_id: str) -> TestReport:
        """Return the stored test report of a session."""
        state = self.session(session_id)
        if state.report_digest is None:
            msg = f"Session {session_id} has no verdict yet"
            raise NotFoundError(msg)
        return TestReport.from_json(self._get_blob(state.report_digest, ".json"))

    def audit(self, session_id: str) -> AuditRecord:
        """Return the audit stream committed for a session."""
        self.session(session_id)
        if session_id not in self._audits:
            msg = f"Session {session_id} has no audit commitment"
            raise NotFoundError(msg)
        digest, timestamp = self._audits[session_id]
        return AuditRecord(
            session_id=session_id,
            bits=decode_bits(self._get_blob(digest, ".bits")),
            retained_at=arrow.get(timestamp),
        )

    def replay(
        self,
        session_id: str,
        registry: Optional[CriteriaRegistry] = None,
    ) -> TestReport:
        """Rerun the battery on the stored bits of a session."""
        state = self.session(session_id)
        criteria = (registry or default_registry).get(state.criteria_id)
        return run_battery(self.bits(session_id), criteria)

    def verify_chain(self) -> List[str]:
        """Check the hash chain of the log, return the problems found."""
        issues = []
        previous = GENESIS
        for number, entry in enumerate(self.entries(), start=1):
            stored = entry.pop("hash", None)
            if entry.get("prev_hash") != previous:
                issues.append(f"Chain broken at entry {number}")
            if stored != _entry_hash(entry):
                issues.append(f"Hash mismatch at entry {number}")
            previous = stored or ""
        if issues:
            logger.warning("Session log %s failed verification", self.log_path)
        return issues
