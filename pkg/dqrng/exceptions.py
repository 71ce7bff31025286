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
"""Exceptions for the dqrng package."""


class DQRNGError(Exception):
    """Base class for all dqrng exceptions."""

    exit_code: int = 1


class ParameterDomainError(DQRNGError, ValueError):
    """Raised when a model or configuration parameter is outside its domain."""


class ConfigurationError(DQRNGError):
    """Raised when a run configuration cannot be loaded or is inconsistent."""


class InternalConsistencyError(DQRNGError):
    """Raised when a numerical result violates an invariant beyond tolerance."""


class UndefinedConditionalError(DQRNGError):
    """Raised when a conditional probability has a zero denominator."""


class InsufficientEntropyError(DQRNGError):
    """Raised when the extractable length is not positive."""

    exit_code = 4


class EncodingError(DQRNGError):
    """Raised when a click cannot be mapped onto a bit pair."""


class InsufficientDataError(DQRNGError):
    """Raised when a statistical test receives too few bits or values."""


class DimensionError(DQRNGError):
    """Raised when an input does not match the dimensions of a hash seed."""


class FormatError(DQRNGError):
    """Raised when a bit, event or report file is malformed."""


class BalanceNeverAchievedError(DQRNGError):
    """Raised when no control interval passes the balance gate."""

    exit_code = 3


class VerdictFailedError(DQRNGError):
    """Raised when the verifier rejects the public sequence."""

    exit_code = 2


# delegation
class ProtocolError(DQRNGError):
    """Raised on malformed frames or out of order messages."""

    exit_code = 5


class TransportError(DQRNGError):
    """Raised when the verifier cannot be reached or the connection breaks."""

    exit_code = 5


class SessionTimeoutError(TransportError):
    """Raised when the verifier does not answer in time."""


class CriteriaRejectedError(ProtocolError):
    """Raised when the verifier does not know the requested criteria."""


class IncompleteStreamError(ProtocolError):
    """Raised when fewer bits than declared were streamed."""


class AuthorizationError(ProtocolError):
    """Raised when the credentials do not carry the required role."""


class NotFoundError(ProtocolError):
    """Raised when a session or audit record does not exist."""


class ConnectionFailedError(TransportError):
    """Raised when no connection to the verifier can be established."""
