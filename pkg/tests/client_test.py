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
"""Test the verifier clients without a running verifier."""
import socket
from typing import NoReturn
from typing import Tuple

import pytest

from dqrng.client import device_submit
from dqrng.client import fetch_verdict
from dqrng.client import parse_endpoint
from dqrng.exceptions import ConnectionFailedError
from dqrng.exceptions import ParameterDomainError
from dqrng.exceptions import ProtocolError
from dqrng.exceptions import SessionTimeoutError
from dqrng.helpers import new_bits
from tests.base import random_bits


def refused(address: Tuple[str, int], timeout: float) -> NoReturn:
    raise ConnectionRefusedError(111, "Connection refused")


def timed_out(address: Tuple[str, int], timeout: float) -> NoReturn:
    raise socket.timeout("timed out")


def never_called(address: Tuple[str, int], timeout: float) -> NoReturn:
    msg = "connector must not be called"
    raise AssertionError(msg)


class TestParseEndpoint:
    def test_host_and_port(self) -> None:
        assert parse_endpoint("verifier.example:5151") == ("verifier.example", 5151)

    def test_tuple(self) -> None:
        assert parse_endpoint(("127.0.0.1", 80)) == ("127.0.0.1", 80)

    @pytest.mark.parametrize("endpoint", ["localhost", ":5151", "host:port"])
    def test_invalid(self, endpoint: str) -> None:
        with pytest.raises(ParameterDomainError):
            parse_endpoint(endpoint)


class TestDeviceSubmit:
    def test_connection_refused(self) -> None:
        with pytest.raises(ConnectionFailedError, match="127.0.0.1:9"):
            device_submit(
                ("127.0.0.1", 9),
                random_bits(100, seed=1),
                token="t",
                connector=refused,
            )

    def test_connect_timeout(self) -> None:
        with pytest.raises(SessionTimeoutError):
            device_submit(
                "127.0.0.1:9",
                random_bits(100, seed=1),
                token="t",
                connector=timed_out,
            )

    def test_oversize_chunk_before_connecting(self) -> None:
        with pytest.raises(ProtocolError):
            device_submit(
                "127.0.0.1:9",
                random_bits(100, seed=1),
                token="t",
                chunk_size=1 << 20,
                connector=never_called,
            )

    def test_empty_sequence(self) -> None:
        with pytest.raises(ParameterDomainError):
            device_submit("127.0.0.1:9", new_bits(), token="t", connector=never_called)

    def test_audit_length_mismatch(self) -> None:
        with pytest.raises(ParameterDomainError):
            device_submit(
                "127.0.0.1:9",
                random_bits(100, seed=1),
                audit=random_bits(99, seed=2),
                token="t",
                connector=never_called,
            )


def test_fetch_verdict_connection_refused() -> None:
    with pytest.raises(ConnectionFailedError):
        fetch_verdict("127.0.0.1:9", "session", token="t", connector=refused)
