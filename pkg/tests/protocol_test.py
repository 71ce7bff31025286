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
"""Test the wire protocol and the session state machine."""
import itertools
import socket
import struct
from typing import Iterator
from typing import Tuple

import pytest

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
from dqrng.exceptions import SessionTimeoutError
from dqrng.exceptions import TransportError
from dqrng.protocol import TRANSITIONS
from dqrng.protocol import BitStreamAssembler
from dqrng.protocol import Frame
from dqrng.protocol import SessionState
from dqrng.protocol import bit_frames
from dqrng.protocol import error_code
from dqrng.protocol import error_frame
from dqrng.protocol import json_frame
from dqrng.protocol import next_phase
from dqrng.protocol import raise_for_error
from dqrng.protocol import read_frame
from tests.base import random_bits


@pytest.fixture
def pair() -> Iterator[Tuple[socket.socket, socket.socket]]:
    left, right = socket.socketpair()
    yield left, right
    left.close()
    right.close()


class TestFrames:
    def test_header_layout(self) -> None:
        data = Frame(MessageType.DATA, b"\x01\x02").encode()

        assert data == b"\x51\x01\x02\x00\x00\x00\x02\x01\x02"

    def test_over_a_socket(self, pair: Tuple[socket.socket, socket.socket]) -> None:
        left, right = pair
        frames = [
            json_frame(MessageType.SESSION_START, {"action": "submit"}),
            Frame(MessageType.DATA, bytes(range(256))),
            Frame(MessageType.VERIFY_REQUEST),
        ]

        for frame in frames:
            left.sendall(frame.encode())
        left.shutdown(socket.SHUT_WR)

        assert [read_frame(right) for _ in frames] == frames
        assert read_frame(right) is None

    def test_json_payload(self) -> None:
        frame = json_frame(MessageType.VERDICT, {"verdict": "pass"})

        assert frame.json() == {"verdict": "pass"}

    def test_json_payload_must_be_an_object(self) -> None:
        with pytest.raises(ProtocolError):
            Frame(MessageType.VERDICT, b"[1, 2]").json()
        with pytest.raises(ProtocolError):
            Frame(MessageType.VERDICT, b"\xff").json()

    def test_wrong_magic(self, pair: Tuple[socket.socket, socket.socket]) -> None:
        left, right = pair

        left.sendall(b"\x52" + Frame(MessageType.DATA, b"x").encode()[1:])

        with pytest.raises(ProtocolError, match="magic"):
            read_frame(right)

    def test_wrong_version(self, pair: Tuple[socket.socket, socket.socket]) -> None:
        left, right = pair

        left.sendall(struct.pack(">BBBI", 0x51, 0x02, 0x02, 0))

        with pytest.raises(ProtocolError, match="version"):
            read_frame(right)

    def test_unknown_type(self, pair: Tuple[socket.socket, socket.socket]) -> None:
        left, right = pair

        left.sendall(struct.pack(">BBBI", 0x51, 0x01, 0x07, 0))

        with pytest.raises(ProtocolError, match="type"):
            read_frame(right)

    def test_oversize_length(self, pair: Tuple[socket.socket, socket.socket]) -> None:
        left, right = pair

        left.sendall(struct.pack(">BBBI", 0x51, 0x01, 0x02, 1 << 30))

        with pytest.raises(ProtocolError):
            read_frame(right)

    def test_oversize_encode(self) -> None:
        frame = Frame(MessageType.DATA, bytes(config.MAX_FRAME_PAYLOAD + 1))

        with pytest.raises(ProtocolError):
            frame.encode()

    def test_eof_inside_a_frame(
        self,
        pair: Tuple[socket.socket, socket.socket],
    ) -> None:
        left, right = pair

        left.sendall(Frame(MessageType.DATA, b"abcdef").encode()[:-2])
        left.shutdown(socket.SHUT_WR)

        with pytest.raises(TransportError):
            read_frame(right)


class TestBitStreams:
    @pytest.mark.parametrize("length", [1, 7, 8, 9, 100, 4096, 10_001])
    @pytest.mark.parametrize("chunk_size", [1, 3, 128, 1 << 16])
    def test_reassembly(self, length: int, chunk_size: int) -> None:
        bits = random_bits(length, seed=length)
        assembler = BitStreamAssembler(length)

        frames = bit_frames(MessageType.DATA, bits, chunk_size)
        done = [assembler.feed(frame.payload) for frame in frames]

        assert done[-1]
        assert not any(done[:-1])
        assert assembler.bits == bits
        assert assembler.received_len == length

    def test_only_final_frame_has_trailer(self) -> None:
        frames = list(bit_frames(MessageType.DATA, random_bits(100, seed=1), 4))

        assert [len(f.payload) for f in frames] == [4, 4, 4, 1 + 4]
        assert frames[-1].payload[-4:] == (100).to_bytes(4, "big")

    def test_incomplete_stream(self) -> None:
        frames = list(bit_frames(MessageType.DATA, random_bits(1000, seed=2), 16))
        assembler = BitStreamAssembler(1000)

        for frame in frames[:-1]:
            assembler.feed(frame.payload)

        assert not assembler.complete
        with pytest.raises(IncompleteStreamError, match="incomplete stream"):
            assembler.bits

    def test_trailer_mismatch(self) -> None:
        (frame,) = bit_frames(MessageType.DATA, random_bits(12, seed=3))
        assembler = BitStreamAssembler(13)

        with pytest.raises(ProtocolError, match="Trailer"):
            assembler.feed(frame.payload)

    def test_oversize_chunk(self) -> None:
        assembler = BitStreamAssembler(16)

        with pytest.raises(ProtocolError, match="Oversize"):
            assembler.feed(b"\x00" * 3)

    def test_data_after_final_frame(self) -> None:
        assembler = BitStreamAssembler(8)
        assembler.feed(b"\xff" + (8).to_bytes(4, "big"))

        with pytest.raises(ProtocolError):
            assembler.feed(b"\x00")

    def test_declared_length_positive(self) -> None:
        with pytest.raises(ProtocolError):
            BitStreamAssembler(0)

    def test_chunk_size_bounds(self) -> None:
        with pytest.raises(ProtocolError):
            list(bit_frames(MessageType.DATA, random_bits(8, seed=4), 0))
        with pytest.raises(ProtocolError):
            list(bit_frames(MessageType.DATA, random_bits(8, seed=4), 1 << 20))


class TestStateMachine:
    def test_happy_path(self) -> None:
        state = SessionState(declared_len=10, criteria_id="default")
        events = [SessionEvent.data] * 3 + [
            SessionEvent.complete,
            SessionEvent.verdict,
            SessionEvent.close,
        ]

        phases = [state.apply(event) for event in events]

        assert phases == [
            Phase.STREAMING,
            Phase.STREAMING,
            Phase.STREAMING,
            Phase.TESTING,
            Phase.VERDICT,
            Phase.CLOSED,
        ]

    def test_phases_never_skip_or_reverse(self) -> None:
        for length in range(1, 7):
            for trace in itertools.product(SessionEvent, repeat=length):
                phase = Phase.INIT
                for event in trace:
                    try:
                        following = next_phase(phase, event)
                    except ProtocolError:
                        assert (phase, event) not in TRANSITIONS
                        break
                    assert following - phase in (0, 1)
                    assert following != phase or phase == Phase.STREAMING
                    phase = following

    def test_verdict_needs_complete_stream(self) -> None:
        state = SessionState(declared_len=10, criteria_id="default")
        state.apply(SessionEvent.data)

        with pytest.raises(ProtocolError, match="not allowed"):
            state.apply(SessionEvent.verdict)

    def test_closed_is_final(self) -> None:
        for event in SessionEvent:
            with pytest.raises(ProtocolError):
                next_phase(Phase.CLOSED, event)

    def test_aborted_session_refuses_events(self) -> None:
        state = SessionState(declared_len=10, criteria_id="default")
        state.apply(SessionEvent.data)

        state.abort("incomplete stream")

        assert state.aborted
        assert state.phase == Phase.STREAMING
        with pytest.raises(ProtocolError, match="aborted"):
            state.apply(SessionEvent.complete)

    def test_document(self) -> None:
        state = SessionState(declared_len=10, criteria_id="default", has_audit=True)
        state.verdict = Verdict.passed
        state.report_digest = "abc"

        assert SessionState.from_dict(state.to_dict()) == state
        assert state.to_dict()["verdict"] == "pass"
        assert state.to_dict()["phase"] == "INIT"

    def test_session_ids_are_unique(self) -> None:
        first = SessionState(declared_len=1, criteria_id="default")
        second = SessionState(declared_len=1, criteria_id="default")

        assert first.session_id != second.session_id


class TestErrors:
    @pytest.mark.parametrize(
        ("error", "code"),
        [
            (ProtocolError("x"), "protocol"),
            (CriteriaRejectedError("x"), "criteria_rejected"),
            (IncompleteStreamError("x"), "incomplete_stream"),
            (InsufficientDataError("x"), "insufficient_data"),
            (AuthorizationError("x"), "unauthorized"),
            (NotFoundError("x"), "not_found"),
            (TransportError("x"), "busy"),
            (SessionTimeoutError("x"), "busy"),
            (DQRNGError("x"), "internal"),
        ],
    )
    def test_error_code(self, error: DQRNGError, code: str) -> None:
        assert error_code(error) == code

    @pytest.mark.parametrize(
        ("code", "cls"),
        [
            ("criteria_rejected", CriteriaRejectedError),
            ("incomplete_stream", IncompleteStreamError),
            ("insufficient_data", InsufficientDataError),
            ("unauthorized", AuthorizationError),
            ("not_found", NotFoundError),
            ("unheard_of", ProtocolError),
        ],
    )
    def test_raise_for_error(self, code: str, cls: type) -> None:
        with pytest.raises(cls, match="went wrong"):
            raise_for_error(error_frame(code, "went wrong"))

    def test_other_frames_pass(self) -> None:
        raise_for_error(json_frame(MessageType.VERDICT, {"verdict": "pass"}))
