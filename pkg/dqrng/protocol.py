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
Wire protocol of the delegated verification service.

Every message is one frame on a reliable ordered byte stream::

    1 byte    magic 0x51
    1 byte    version 0x01
    1 byte    message type
    4 bytes   payload length, unsigned big endian
    payload

SESSION_START, VERDICT and ERROR carry JSON.  DATA and AUDIT_DATA carry bits
packed most significant bit first, in whole bytes; the final frame of a stream
appends a 4 byte big endian trailer with the exact bit count.  The receiver knows
the declared length, so the final frame is recognised by its size: the bytes
still missing plus four.

The module also holds the session state machine, the same for client and
server::

    INIT -> STREAMING -> TESTING -> VERDICT -> CLOSED
"""
import json
import logging
import struct
import uuid
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Dict
from typing import Iterator
from typing import Optional
from typing import Tuple
from typing import Type

from bitarray import bitarray

from dqrng import config
from dqrng.enums import MessageType
from dqrng.enums import Phase
from dqrng.enums import SessionEvent
from dqrng.enums import Verdict
from dqrng.exceptions import AuthorizationError
from dqrng.exceptions import CriteriaRejectedError
from dqrng.exceptions import DQRNGError
from dqrng.exceptions import IncompleteStreamError
from dqrng.exceptions import InsufficientDataError
from dqrng.exceptions import NotFoundError
from dqrng.exceptions import ProtocolError
from dqrng.exceptions import TransportError
from dqrng.helpers import bits_from_bytes
from dqrng.types import Connection

__all__ = [
    "ERROR_CODES",
    "BitStreamAssembler",
    "Frame",
    "SessionState",
    "bit_frames",
    "error_code",
    "error_frame",
    "json_frame",
    "next_phase",
    "raise_for_error",
    "read_frame",
    "recv_exact",
]

logger = logging.getLogger(__name__)

HEADER = struct.Struct(">BBBI")
TRAILER = struct.Struct(">I")

TRANSITIONS: Dict[Tuple[Phase, SessionEvent], Phase] = {
    (Phase.INIT, SessionEvent.data): Phase.STREAMING,
    (Phase.STREAMING, SessionEvent.data): Phase.STREAMING,
    (Phase.STREAMING, SessionEvent.complete): Phase.TESTING,
    (Phase.TESTING, SessionEvent.verdict): Phase.VERDICT,
    (Phase.VERDICT, SessionEvent.close): Phase.CLOSED,
}

ERROR_CODES: Dict[str, Type[DQRNGError]] = {
    "protocol": ProtocolError,
    "criteria_rejected": CriteriaRejectedError,
    "incomplete_stream": IncompleteStreamError,
    "insufficient_data": InsufficientDataError,
    "unauthorized": AuthorizationError,
    "not_found": NotFoundError,
    "busy": TransportError,
    "internal": DQRNGError,
}


def next_phase(phase: Phase, event: SessionEvent) -> Phase:
    """
    Return the phase a session moves to on ``event``.

    Raises
    ------
    ProtocolError
        If the event is not allowed in ``phase``.

    """
    try:
        return TRANSITIONS[(phase, event)]
    except KeyError as error:
        msg = f"Event {event.value} is not allowed in phase {phase.name}"
        raise ProtocolError(msg) from error


@dataclass
class SessionState:
    """
    State of one verification session.

    Aborted sessions keep the phase they were in and record the reason in
    ``error``; they never move again.
    """

    declared_len: int
    criteria_id: str
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    phase: Phase = Phase.INIT
    received_len: int = 0
    has_audit: bool = False
    verdict: Optional[Verdict] = None
    report_digest: Optional[str] = None
    error: Optional[str] = None

    @property
    def aborted(self) -> bool:
        """Return True when the session ended with an error."""
        return self.error is not None

    def apply(self, event: SessionEvent) -> Phase:
        """Move to the next phase, see `next_phase`."""
        if self.aborted:
            msg = f"Session {self.session_id} was aborted: {self.error}"
            raise ProtocolError(msg)
        self.phase = next_phase(self.phase, event)
        return self.phase

    def abort(self, reason: str) -> None:
        """Mark the session as aborted."""
        self.error = reason

    def to_dict(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "phase": self.phase.name,
            "declared_len": self.declared_len,
            "received_len": self.received_len,
            "criteria_id": self.criteria_id,
            "has_audit": self.has_audit,
            "verdict": None if self.verdict is None else self.verdict.value,
            "report_digest": self.report_digest,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SessionState":
        verdict = data.get("verdict")
        return cls(
            declared_len=int(data["declared_len"]),
            criteria_id=str(data["criteria_id"]),
            session_id=str(data["session_id"]),
            phase=Phase[data["phase"]],
            received_len=int(data["received_len"]),
            has_audit=bool(data.get("has_audit", False)),
            verdict=None if verdict is None else Verdict(verdict),
            report_digest=data.get("report_digest"),
            error=data.get("error"),
        )


@dataclass(frozen=True)
class Frame:
    """One message of the wire protocol."""

    message_type: MessageType
    payload: bytes = b""

    def encode(self) -> bytes:
        """
        Return the frame with its header.

        Raises
        ------
        ProtocolError
            If the payload exceeds the maximum frame size.

        """
        if len(self.payload) > config.MAX_FRAME_PAYLOAD:
            msg = (
                f"Payload of {len(self.payload)} bytes exceeds the maximum of "
                f"{config.MAX_FRAME_PAYLOAD}"
            )
            raise ProtocolError(msg)
        header = HEADER.pack(
            config.WIRE_MAGIC,
            config.WIRE_VERSION,
            self.message_type,
            len(self.payload),
        )
        return header + self.payload

    def json(self) -> Dict[str, Any]:
        """
        Parse the JSON payload.

        Raises
        ------
        ProtocolError
            If the payload is not a JSON object.

        """
        try:
            document = json.loads(self.payload.decode("utf-8"))
        except ValueError as error:
            msg = f"{self.message_type.name} payload is not valid JSON"
            raise ProtocolError(msg) from error
        if not isinstance(document, dict):
            msg = f"{self.message_type.name} payload must be a JSON object"
            raise ProtocolError(msg)
        return document


def json_frame(message_type: MessageType, document: Dict[str, Any]) -> Frame:
    """Create a frame with a JSON payload."""
    payload = json.dumps(document, sort_keys=True).encode("utf-8")
    return Frame(message_type, payload)


def error_frame(code: str, message: str) -> Frame:
    """Create an ERROR frame."""
    return json_frame(MessageType.ERROR, {"code": code, "message": message})


def error_code(error: DQRNGError) -> str:
    """Return the wire code of an exception, the most specific match wins."""
    for code, cls in ERROR_CODES.items():
        if type(error) is cls:
            return code
    for code, cls in ERROR_CODES.items():
        if isinstance(error, cls):
            return code
    return "internal"


def raise_for_error(frame: Frame) -> None:
    """Raise the exception an ERROR frame stands for, do nothing otherwise."""
    if frame.message_type != MessageType.ERROR:
        return
    document = frame.json()
    cls = ERROR_CODES.get(str(document.get("code")), ProtocolError)
    msg = f"Verifier error: {document.get('message', 'no message')}"
    raise cls(msg)


def recv_exact(conn: Connection, size: int, *, allow_eof: bool = False) -> bytes:
    """
    Receive exactly ``size`` bytes.

    Returns ``b""`` when the stream ends before the first byte and ``allow_eof``
    is set.

    Raises
    ------
    TransportError
        If the stream ends part way.

    """
    chunks = []
    received = 0
    while received < size:
        chunk = conn.recv(size - received)
        if not chunk:
            if received == 0 and allow_eof:
                return b""
            msg = f"Connection closed after {received} of {size} bytes"
            raise TransportError(msg)
        chunks.append(chunk)
        received += len(chunk)
    return b"".join(chunks)


def read_frame(conn: Connection) -> Optional[Frame]:
    """
    Read the next frame, ``None`` when the peer closed between frames.

    Raises
    ------
    ProtocolError
        On a wrong magic byte or version, an unknown type or an oversize payload.
    TransportError
        If the stream ends inside a frame.

    """
    header = recv_exact(conn, HEADER.size, allow_eof=True)
    if not header:
        return None
    magic, version, code, length = HEADER.unpack(header)
    if magic != config.WIRE_MAGIC:
        msg = f"Wrong magic byte 0x{magic:02x}"
        raise ProtocolError(msg)
    if version != config.WIRE_VERSION:
        msg = f"Unsupported protocol version 0x{version:02x}"
        raise ProtocolError(msg)
    try:
        message_type = MessageType(code)
    except ValueError as error:
        msg = f"Unknown message type 0x{code:02x}"
        raise ProtocolError(msg) from error
    if length > config.MAX_FRAME_PAYLOAD:
        msg = f"Frame of {length} bytes exceeds the payload limit"
        raise ProtocolError(msg)
    frame = Frame(message_type, recv_exact(conn, length))
    logger.debug("Received %s frame of %d bytes", message_type.name, length)
    return frame


def bit_frames(
    message_type: MessageType,
    bits: bitarray,
    chunk_size: int = config.DATA_CHUNK,
) -> Iterator[Frame]:
    """
    Split a bit stream into DATA or AUDIT_DATA frames.

    ``chunk_size`` is the number of whole bytes per frame.  The final frame
    carries the remaining bytes and the bit count trailer.

    Raises
    ------
    ProtocolError
        If a frame would exceed the maximum payload.

    """
    if chunk_size < 1 or chunk_size + TRAILER.size > config.MAX_FRAME_PAYLOAD:
        msg = (
            f"Chunk size {chunk_size} is outside 1 .. "
            f"{config.MAX_FRAME_PAYLOAD - TRAILER.size}"
        )
        raise ProtocolError(msg)
    data = bits.tobytes()
    offset = 0
    while len(data) - offset > chunk_size:
        yield Frame(message_type, data[offset : offset + chunk_size])
        offset += chunk_size
    yield Frame(message_type, data[offset:] + TRAILER.pack(len(bits)))


class BitStreamAssembler:
    """Reassemble the bits of DATA or AUDIT_DATA frames of a declared length."""

    def __init__(self, declared_len: int) -> None:
        """Initialize the assembler for ``declared_len`` bits."""
        if declared_len < 1:
            msg = f"Declared length must be positive, got {declared_len}"
            raise ProtocolError(msg)
        self.declared_len = declared_len
        self._expected_bytes = (declared_len + 7) // 8
        self._buffer = bytearray()
        self._bits: Optional[bitarray] = None

    def __repr__(self) -> str:
        """Create a string (c)representation for BitStreamAssembler."""
        return (
            f"{self.__class__.__module__}.{self.__class__.__name__}("
            f"declared_len={self.declared_len!r}, "
            ")"
        )

    @property
    def complete(self) -> bool:
        """Return True once the final frame was received."""
        return self._bits is not None

    @property
    def received_len(self) -> int:
        """Return the number of bits received so far."""
        if self._bits is not None:
            return len(self._bits)
        return min(8 * len(self._buffer), self.declared_len)

    @property
    def bits(self) -> bitarray:
        """
        Return the assembled bits.

        Raises
        ------
        IncompleteStreamError
            If the final frame has not arrived.

        """
        if self._bits is None:
            msg = (
                f"incomplete stream: {self.received_len} of {self.declared_len} "
                "bits received"
            )
            raise IncompleteStreamError(msg)
        return self._bits

    def feed(self, payload: bytes) -> bool:
        """
        Add the payload of one frame, return True when the stream is complete.

        Raises
        ------
        ProtocolError
            If the stream is already complete, the payload is larger than the
            rest of the stream or the trailer does not match the declared length.

        """
        if self._bits is not None:
            msg = "Data received after the final frame"
            raise ProtocolError(msg)
        missing = self._expected_bytes - len(self._buffer)
        if len(payload) == missing + TRAILER.size:
            (count,) = TRAILER.unpack(payload[missing:])
            if count != self.declared_len:
                msg = f"Trailer announces {count} bits, {self.declared_len} declared"
                raise ProtocolError(msg)
            self._buffer.extend(payload[:missing])
            self._bits = bits_from_bytes(bytes(self._buffer), count)
            return True
        if len(payload) > missing:
            msg = f"Oversize chunk of {len(payload)} bytes, {missing} bytes expected"
            raise ProtocolError(msg)
        self._buffer.extend(payload)
        return False
