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
Enums for the dqrng package.

This module contains the enums used for configuration values, the verifier
session phases and the wire protocol message types.
"""
import logging
from enum import Enum
from enum import IntEnum
from enum import unique

logger = logging.getLogger(__name__)

__all__ = [
    "DriftMode",
    "MessageType",
    "Phase",
    "RelaxedEnum",
    "Role",
    "Scheme",
    "SessionEvent",
    "Verdict",
]


class RelaxedEnum(Enum):
    """
    Enum with relaxed string value matching.

    Values read from a configuration file are matched case-insensitively.
    A case-insensitive match is logged as a warning, a value that does not match
    any member raises a `ValueError`.

    Example:
    -------
        >>> Scheme("Spatial")
        <Scheme.spatial: 'spatial'>

    The subclass must define all values as strings.

    """

    @classmethod
    def _missing_(cls, value: object) -> "RelaxedEnum":
        assert isinstance(value, str)  # noqa: S101
        value = value.lower()
        for member in cls:
            assert isinstance(member.value, str)  # noqa: S101
            if member.value.lower() == value:
                logger.warning(
                    "%s: Found case-insensitive match for %s in %r",
                    cls.__name__,
                    value,
                    member.value,
                )
                return member
        msg = (
            f"Unknown value '{value}' for {cls.__name__}. "
            f"Known values are {', '.join(member.value for member in cls)}."
        )
        raise ValueError(msg)


@unique
class Scheme(RelaxedEnum):
    """
    How the four outcomes of a pulse are told apart.

    - spatial - four detectors behind a tree of beam splitters, the detector that
        clicks encodes the outcome.
    - temporal - one detector, the paths are delayed into four time bins and the
        arrival bin encodes the outcome.
    """

    spatial = "spatial"
    temporal = "temporal"


@unique
class DriftMode(RelaxedEnum):
    """Model for the slow drift of the channel probabilities."""

    none = "none"
    ou_walk = "ou_walk"
    sinusoid = "sinusoid"


@unique
class Role(RelaxedEnum):
    """Roles a verifier client can authenticate as."""

    device = "device"
    auditor = "auditor"
    reader = "reader"


@unique
class Verdict(RelaxedEnum):
    """Decision of the verifier on a public sequence."""

    passed = "pass"
    failed = "fail"


@unique
class Phase(IntEnum):
    """
    Phases of a verification session.

    Sessions only ever move forward one phase at a time:
    INIT -> STREAMING -> TESTING -> VERDICT -> CLOSED.
    """

    INIT = 0
    STREAMING = 1
    TESTING = 2
    VERDICT = 3
    CLOSED = 4


@unique
class MessageType(IntEnum):
    """Message types of the delegation wire protocol."""

    SESSION_START = 0x01
    DATA = 0x02
    VERIFY_REQUEST = 0x03
    VERDICT = 0x04
    AUDIT_DATA = 0x05
    ERROR = 0x06


@unique
class SessionEvent(RelaxedEnum):
    """Events that move a verification session to its next phase."""

    data = "data"
    complete = "complete"
    verdict = "verdict"
    close = "close"
