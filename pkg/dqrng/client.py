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
Clients of the verifier service.

`device_submit` streams the public sequence Q2 and, when given, the audit
stream.  It has no parameter for the private sequence, Q1 never leaves the
device.  `audit_retrieve` and `fetch_verdict` are the auditor and reader sides.
"""
import logging
import socket
from dataclasses import dataclass
from typing import Any
from typing import Callable
from typing import Dict
from typing import Iterator
from typing import Optional
from typing import Tuple
from typing import Union

import arrow
from bitarray import bitarray

from dqrng import config
from dqrng.battery import TestReport
from dqrng.enums import MessageType
from dqrng.enums import Role
from dqrng.enums import Verdict
from dqrng.exceptions import ConnectionFailedError
from dqrng.exceptions import ParameterDomainError
from dqrng.exceptions import ProtocolError
from dqrng.exceptions import SessionTimeoutError
from dqrng.exceptions import TransportError
from dqrng.protocol import BitStreamAssembler
from dqrng.protocol import Frame
from dqrng.protocol import bit_frames
from dqrng.protocol import json_frame
from dqrng.protocol import raise_for_error
from dqrng.protocol import read_frame
from dqrng.store import AuditRecord
from dqrng.types import Connection

__all__ = [
    "Endpoint",
    "Submission",
    "audit_retrieve",
    "device_submit",
    "fetch_verdict",
    "parse_endpoint",
]

logger = logging.getLogger(__name__)

Endpoint = Union[str, Tuple[str, int]]
Connector = Callable[[Tuple[str, int], float], Connection]


@dataclass(frozen=True)
class Submission:
    """Verdict of the verifier on a submitted sequence."""

    session_id: str
    criteria_id: str
    verdict: Verdict
    report: TestReport

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.passed

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "Submission":
        try:
            return cls(
                session_id=str(document["session_id"]),
                criteria_id=str(document["criteria_id"]),
                verdict=Verdict(document["verdict"]),
                report=TestReport.from_dict(document["report"]),
            )
        except (KeyError, ValueError) as error:
            msg = f"Malformed verdict document: {error}"
            raise ProtocolError(msg) from error


def parse_endpoint(endpoint: Endpoint) -> Tuple[str, int]:
    """Return ``(host, port)`` from a tuple or a ``host:port`` string."""
    if isinstance(endpoint, tuple):
        return endpoint
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        msg = f"Endpoint must look like host:port, got {endpoint!r}"
        raise ParameterDomainError(msg)
    return host, int(port)


def _create_connection(address: Tuple[str, int], timeout: float) -> Connection:
    return socket.create_connection(address, timeout=timeout)


class _Channel:
    """A connection that maps socket failures onto transport errors."""

    def __init__(
        self,
        endpoint: Endpoint,
        timeout: float,
        connector: Connector,
    ) -> None:
        self.address = parse_endpoint(endpoint)
        try:
            self.conn = connector(self.address, timeout)
        except socket.timeout as error:
            msg = f"Timed out connecting to {self.address[0]}:{self.address[1]}"
            raise SessionTimeoutError(msg) from error
        except OSError as error:
            msg = f"Cannot connect to {self.address[0]}:{self.address[1]}: {error}"
            raise ConnectionFailedError(msg) from error
        self.conn.settimeout(timeout)

    def __enter__(self) -> "_Channel":
        return self

    def __exit__(self, *args: object) -> None:
        self.conn.close()

    def send(self, frames: Union[Frame, Iterator[Frame]]) -> None:
        try:
            for frame in [frames] if isinstance(frames, Frame) else frames:
                self.conn.sendall(frame.encode())
        except socket.timeout as error:
            msg = "Timed out sending to the verifier"
            raise SessionTimeoutError(msg) from error
        except OSError as error:
            msg = f"Sending to the verifier failed: {error}"
            raise TransportError(msg) from error

    def receive(self, *expected: MessageType) -> Frame:
        try:
            frame = read_frame(self.conn)
        except socket.timeout as error:
            msg = "Timed out waiting for the verifier"
            raise SessionTimeoutError(msg) from error
        except OSError as error:
            msg = f"Receiving from the verifier failed: {error}"
            raise TransportError(msg) from error
        if frame is None:
            msg = "The verifier closed the connection"
            raise TransportError(msg)
        raise_for_error(frame)
        if frame.message_type not in expected:
            msg = f"Unexpected {frame.message_type.name} frame from the verifier"
            raise ProtocolError(msg)
        return frame


def device_submit(
    endpoint: Endpoint,
    q2: bitarray,
    criteria_id: str = "default",
    audit: Optional[bitarray] = None,
    *,
    token: str,
    timeout: float = config.SESSION_TIMEOUT,
    chunk_size: int = config.DATA_CHUNK,
    connector: Connector = _create_connection,
) -> Submission:
    """
    Submit the public sequence for verification and wait for the verdict.

    Parameters
    ----------
    endpoint : str or tuple
        Address of the verifier.
    q2 : bitarray
        The public sequence.
    criteria_id : str
        The agreed verification criteria.
    audit : bitarray, optional
        The audit stream ``Q1 XOR Q2`` to commit with the verifier.
    token : str
        Device credentials.
    chunk_size : int
        Bytes per DATA frame.

    Raises
    ------
    ConnectionFailedError
        If the verifier cannot be reached.
    SessionTimeoutError
        If the verifier does not answer within ``timeout`` seconds.
    CriteriaRejectedError
        If the verifier does not know ``criteria_id``.
    ProtocolError
        On an oversize chunk or a malformed answer.

    """
    if not q2:
        msg = "The public sequence is empty"
        raise ParameterDomainError(msg)
    if audit is not None and len(audit) != len(q2):
        msg = f"Audit stream has {len(audit)} bits, public sequence {len(q2)}"
        raise ParameterDomainError(msg)
    data_frames = list(bit_frames(MessageType.DATA, q2, chunk_size))
    audit_frames = []
    if audit is not None:
        audit_frames = list(bit_frames(MessageType.AUDIT_DATA, audit, chunk_size))
    start = {
        "role": Role.device.value,
        "token": token,
        "action": "submit",
        "criteria_id": criteria_id,
        "declared_len": len(q2),
        "has_audit": audit is not None,
    }
    with _Channel(endpoint, timeout, connector) as channel:
        channel.send(json_frame(MessageType.SESSION_START, start))
        session_id = channel.receive(MessageType.SESSION_START).json()["session_id"]
        logger.info("Session %s opened, streaming %d bits", session_id, len(q2))
        channel.send(iter(data_frames))
        channel.send(iter(audit_frames))
        channel.send(Frame(MessageType.VERIFY_REQUEST))
        submission = Submission.from_document(
            channel.receive(MessageType.VERDICT).json(),
        )
    logger.info(
        "Session %s verdict: %s",
        submission.session_id,
        submission.verdict.value,
    )
    return submission


def audit_retrieve(
    endpoint: Endpoint,
    session_id: str,
    *,
    token: str,
    timeout: float = config.SESSION_TIMEOUT,
    connector: Connector = _create_connection,
) -> AuditRecord:
    """
    Retrieve the audit stream committed for a session.

    Raises
    ------
    AuthorizationError
        If ``token`` does not carry the auditor role.
    NotFoundError
        If the session is unknown or has no audit commitment.

    """
    start = {
        "role": Role.auditor.value,
        "token": token,
        "action": "audit_retrieve",
        "session_id": session_id,
    }
    with _Channel(endpoint, timeout, connector) as channel:
        channel.send(json_frame(MessageType.SESSION_START, start))
        header = channel.receive(MessageType.SESSION_START).json()
        assembler = BitStreamAssembler(int(header["bit_count"]))
        while not assembler.feed(channel.receive(MessageType.AUDIT_DATA).payload):
            pass
    return AuditRecord(
        session_id=session_id,
        bits=assembler.bits,
        retained_at=arrow.get(header["retained_at"]),
    )


def fetch_verdict(
    endpoint: Endpoint,
    session_id: str,
    *,
    token: str,
    role: Role = Role.reader,
    timeout: float = config.SESSION_TIMEOUT,
    connector: Connector = _create_connection,
) -> Submission:
    """Fetch the stored verdict and report of a session."""
    start = {
        "role": role.value,
        "token": token,
        "action": "fetch_verdict",
        "session_id": session_id,
    }
    with _Channel(endpoint, timeout, connector) as channel:
        channel.send(json_frame(MessageType.SESSION_START, start))
        return Submission.from_document(channel.receive(MessageType.VERDICT).json())
