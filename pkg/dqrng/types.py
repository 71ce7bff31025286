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
"""Types for dqrng."""
from typing import Optional

import numpy as np
import numpy.typing as npt
from typing_extensions import Protocol

__all__ = [
    "BitVector",
    "Connection",
    "FloatArray",
    "IndexArray",
]

FloatArray = npt.NDArray[np.float64]
IndexArray = npt.NDArray[np.int64]
# one bit per uint8 entry, values 0 or 1
BitVector = npt.NDArray[np.uint8]


class Connection(Protocol):
    """Protocol for the reliable ordered byte stream a session runs on."""

    def sendall(self, data: bytes) -> None:
        """Send all bytes."""

    def recv(self, bufsize: int) -> bytes:
        """Receive at most bufsize bytes, an empty result means end of stream."""

    def settimeout(self, value: Optional[float]) -> None:
        """Set the blocking timeout."""

    def close(self) -> None:
        """Close the connection."""
