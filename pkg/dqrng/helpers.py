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
"""Helper functions for dqrng."""

import hashlib
import logging
from typing import Iterable

import numpy as np
from bitarray import bitarray

from dqrng.exceptions import FormatError
from dqrng.types import BitVector

__all__ = [
    "bits_digest",
    "bits_from_array",
    "bits_from_bytes",
    "bits_from_string",
    "bits_to_array",
    "concat_bits",
    "new_bits",
]

logger = logging.getLogger(__name__)


def new_bits() -> bitarray:
    """Return an empty bitarray with most significant bit first packing."""
    return bitarray(endian="big")


def bits_from_array(values: Iterable[int]) -> bitarray:
    """
    Create a bitarray from an array of zeros and ones.

    Any non-zero entry becomes a one.
    """
    array = np.asarray(values)
    bits = new_bits()
    bits.pack((array != 0).astype(np.uint8).tobytes())
    return bits


def bits_to_array(bits: bitarray) -> BitVector:
    """Return one uint8 entry per bit, each 0 or 1."""
    return np.frombuffer(bits.unpack(), dtype=np.uint8).copy()


def bits_from_bytes(data: bytes, bit_count: int) -> bitarray:
    """
    Unpack ``bit_count`` bits from most significant bit first packed bytes.

    Raises
    ------
    FormatError
        If ``data`` does not hold exactly ``ceil(bit_count / 8)`` bytes.

    """
    if len(data) != (bit_count + 7) // 8:
        msg = f"{len(data)} bytes cannot hold exactly {bit_count} bits"
        raise FormatError(msg)
    bits = new_bits()
    bits.frombytes(data)
    del bits[bit_count:]
    return bits


def bits_from_string(text: str) -> bitarray:
    """Create a bitarray from a string of ``0`` and ``1`` characters."""
    return bitarray(text, endian="big")


def concat_bits(parts: Iterable[bitarray]) -> bitarray:
    """Concatenate bitarrays in order."""
    bits = new_bits()
    for part in parts:
        bits.extend(part)
    return bits


def bits_digest(bits: bitarray) -> str:
    """Return the SHA-256 hex digest of the bit count and the packed bits."""
    digest = hashlib.sha256()
    digest.update(len(bits).to_bytes(8, "little"))
    digest.update(bits.tobytes())
    return digest.hexdigest()
