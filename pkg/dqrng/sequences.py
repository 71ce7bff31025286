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
Paired sequences.

Every post-selected click is one measurement of the four level state
``sqrt(p1)|00> + sqrt(p2)|01> + sqrt(p3)|10> + sqrt(p4)|11>``.  The first bit of
the measured ket goes to the private sequence Q1, the second bit to the public
sequence Q2.  When the two one-bit marginals are equal the sequences carry the
same Shannon entropy, so testing Q2 tests the source of Q1 without revealing it.

Channel ``c`` corresponds to the ket whose binary value is ``c``::

    channel 0 -> |00>    channel 1 -> |01>
    channel 2 -> |10>    channel 3 -> |11>

An auditor may additionally hold ``Q1 XOR Q2``, which together with the public
sequence reconstructs the private one.
"""
import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING
from typing import Iterable
from typing import Optional
from typing import Tuple
from typing import Union

import numpy as np
from bitarray import bitarray

from dqrng import config
from dqrng.exceptions import EncodingError
from dqrng.exceptions import ParameterDomainError
from dqrng.helpers import bits_from_array
from dqrng.helpers import bits_to_array
from dqrng.types import FloatArray

if TYPE_CHECKING:
    from dqrng.optics import ClickEvent
    from dqrng.optics import ClickEvents

__all__ = [
    "PairedSequences",
    "ProbVector",
    "audit_stream",
    "binary_entropy",
    "decode_pair",
    "encode_clicks",
    "entropy_distance",
    "entropy_surface",
    "max_entropy_distance",
    "mutual_information_estimate",
    "mutual_information_threshold",
    "reconstruct_private",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbVector:
    """Outcome probabilities of the kets ``|00>, |01>, |10>, |11>``."""

    p1: float
    p2: float
    p3: float
    p4: float

    def __post_init__(self) -> None:
        """Check that the entries form a probability distribution."""
        for value in self.as_tuple():
            if not 0.0 <= value <= 1.0:
                msg = f"Probabilities must be in [0, 1], got {self.as_tuple()}"
                raise ParameterDomainError(msg)
        total = math.fsum(self.as_tuple())
        if abs(total - 1.0) > config.PROBABILITY_TOLERANCE:
            msg = f"Probabilities must sum to 1, got {total!r}"
            raise ParameterDomainError(msg)

    @classmethod
    def uniform(cls) -> "ProbVector":
        """Return the ideal, perfectly balanced state."""
        return cls(0.25, 0.25, 0.25, 0.25)

    @classmethod
    def from_weights(cls, weights: Iterable[float]) -> "ProbVector":
        """Normalise four non-negative weights, for example click counts."""
        values = [float(w) for w in weights]
        if len(values) != config.CHANNELS:
            msg = f"Four weights are required, got {len(values)}"
            raise ParameterDomainError(msg)
        total = math.fsum(values)
        if total <= 0 or min(values) < 0:
            msg = f"Weights must be non-negative with a positive sum, got {values}"
            raise ParameterDomainError(msg)
        normalised = [v / total for v in values]
        # push the rounding residue onto the largest entry
        largest = normalised.index(max(normalised))
        normalised[largest] += 1.0 - math.fsum(normalised)
        return cls(*normalised)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        """Return the four probabilities in ket order."""
        return (self.p1, self.p2, self.p3, self.p4)

    def as_array(self) -> FloatArray:
        """Return the probabilities as a numpy array in channel order."""
        return np.array(self.as_tuple(), dtype=np.float64)

    @property
    def q1_one(self) -> float:
        """Probability of a one in the private sequence, ``p3 + p4``."""
        return self.p3 + self.p4

    @property
    def q2_one(self) -> float:
        """Probability of a one in the public sequence, ``p2 + p4``."""
        return self.p2 + self.p4


class PairedSequences:
    """
    The private sequence Q1, the public sequence Q2 and the optional audit stream.

    Bits are held in `bitarray` objects with most significant bit first packing.
    """

    q1: bitarray
    q2: bitarray
    audit: Optional[bitarray]

    def __init__(
        self,
        q1: bitarray,
        q2: bitarray,
        audit: Optional[bitarray] = None,
    ) -> None:
        """
        Initialize the paired sequences.

        Raises
        ------
        ParameterDomainError
            If the lengths differ or the audit stream is not ``q1 ^ q2``.

        """
        if len(q1) != len(q2):
            msg = f"Q1 and Q2 must have equal length, got {len(q1)} and {len(q2)}"
            raise ParameterDomainError(msg)
        if audit is not None and audit != (q1 ^ q2):
            msg = "The audit stream must be the XOR of Q1 and Q2"
            raise ParameterDomainError(msg)
        self.q1 = q1
        self.q2 = q2
        self.audit = audit

    def __repr__(self) -> str:
        """Create a string (c)representation for PairedSequences."""
        return (
            f"{self.__class__.__module__}.{self.__class__.__name__}("
            f"q1={self.q1!r}, "
            f"q2={self.q2!r}, "
            f"audit={self.audit!r}, "
            ")"
        )

    def __len__(self) -> int:
        """Return the number of measurements N."""
        return len(self.q1)

    def __eq__(self, other: object) -> bool:
        """Compare two PairedSequences instances for equality."""
        if not isinstance(other, PairedSequences):
            return False
        return (self.q1, self.q2, self.audit) == (other.q1, other.q2, other.audit)

    @property
    def length(self) -> int:
        """Return the number of measurements N."""
        return len(self.q1)

    def extend(self, other: "PairedSequences") -> None:
        """Append the measurements of another pair."""
        self.q1.extend(other.q1)
        self.q2.extend(other.q2)
        if self.audit is not None and other.audit is not None:
            self.audit.extend(other.audit)
        else:
            self.audit = None

    def with_audit(self) -> "PairedSequences":
        """Return a copy that carries the audit stream."""
        return PairedSequences(self.q1.copy(), self.q2.copy(), audit_stream(self))

    def truncated(self, length: int) -> "PairedSequences":
        """Return the first ``length`` measurements."""
        audit = self.audit[:length] if self.audit is not None else None
        return PairedSequences(self.q1[:length], self.q2[:length], audit)


def encode_clicks(
    events: Union["ClickEvents", Iterable["ClickEvent"]],
    *,
    audit: bool = False,
) -> PairedSequences:
    """
    Map post-selected clicks onto the paired sequences.

    Q1 receives the first bit of the measured ket, Q2 the second.

    Raises
    ------
    EncodingError
        If a channel is outside ``0 .. 3``.

    """
    channels = getattr(events, "channels", None)
    if channels is None:
        channels = [event.channel for event in events]
    values = np.asarray(channels, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= config.CHANNELS):
        bad = values[(values < 0) | (values >= config.CHANNELS)][0]
        msg = f"Channel {bad} cannot be mapped onto a two bit ket"
        raise EncodingError(msg)
    q1 = bits_from_array((values >> 1) & 1)
    q2 = bits_from_array(values & 1)
    return PairedSequences(q1, q2, q1 ^ q2 if audit else None)


def decode_pair(q1_bit: int, q2_bit: int) -> int:
    """Return the channel that produced the bit pair, inverse of `encode_clicks`."""
    if q1_bit not in (0, 1) or q2_bit not in (0, 1):
        msg = f"Bits must be 0 or 1, got ({q1_bit}, {q2_bit})"
        raise EncodingError(msg)
    return (q1_bit << 1) | q2_bit


def binary_entropy(p: float) -> float:
    """
    Return the Shannon entropy in bits of a coin with bias ``p``.

    ``H(0) = H(1) = 0`` by the usual limit convention.
    """
    if not 0.0 <= p <= 1.0:
        msg = f"Probability must be in [0, 1], got {p}"
        raise ParameterDomainError(msg)
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def entropy_distance(probs: ProbVector) -> float:
    """Return ``|H(Q1) - H(Q2)|`` of the one-bit marginals."""
    return abs(binary_entropy(probs.q1_one) - binary_entropy(probs.q2_one))


def max_entropy_distance(marginal_lo: float, marginal_hi: float) -> float:
    """
    Return the largest ``|H(p) - H(q)|`` for ``p, q`` in ``[lo, hi]``.

    H is concave with its maximum at one half, so the largest value is reached at
    the point of the interval closest to one half and the smallest at one of the
    two endpoints.
    """
    if not 0.0 <= marginal_lo <= marginal_hi <= 1.0:
        msg = f"Need 0 <= lo <= hi <= 1, got [{marginal_lo}, {marginal_hi}]"
        raise ParameterDomainError(msg)
    nearest = min(max(0.5, marginal_lo), marginal_hi)
    lowest = min(binary_entropy(marginal_lo), binary_entropy(marginal_hi))
    return binary_entropy(nearest) - lowest


def entropy_surface(
    marginal_lo: float,
    marginal_hi: float,
    steps: int = 41,
) -> Tuple[FloatArray, FloatArray]:
    """
    Return the grid and ``|H(p) - H(q)|`` over ``[lo, hi]`` squared.

    The first array holds the ``steps`` grid points, the second the
    ``steps x steps`` matrix of entropy differences, rows indexed by the marginal
    of Q1 and columns by the marginal of Q2.
    """
    grid = np.linspace(marginal_lo, marginal_hi, steps)
    entropies = np.array([binary_entropy(float(p)) for p in grid])
    return grid, np.abs(entropies[:, None] - entropies[None, :])


def mutual_information_estimate(seqs: PairedSequences) -> float:
    """
    Return the plug-in estimate of ``I(Q1; Q2)`` in bits.

    Computed from the empirical 2x2 joint distribution of ``(q1[i], q2[i])``
    without bias correction; the estimate is never negative.
    """
    if len(seqs) < 1:
        msg = "Mutual information needs at least one measurement"
        raise ParameterDomainError(msg)
    q1 = bits_to_array(seqs.q1).astype(np.int64)
    q2 = bits_to_array(seqs.q2).astype(np.int64)
    joint = np.bincount(2 * q1 + q2, minlength=4).reshape(2, 2) / len(seqs)
    outer = joint.sum(axis=1)[:, None] * joint.sum(axis=0)[None, :]
    mask = joint > 0
    information = float(np.sum(joint[mask] * np.log2(joint[mask] / outer[mask])))
    return max(information, 0.0)


def mutual_information_threshold(length: int) -> float:
    """
    Return the acceptance threshold for the plug-in mutual information.

    Ten times the expected plug-in bias ``1 / (2 N ln 2)`` of a 2x2 table.
    """
    return config.MI_BIAS_FACTOR / (2.0 * length * math.log(2.0))


def audit_stream(seqs: PairedSequences) -> bitarray:
    """Return the auditor's sequence ``Q1 XOR Q2``."""
    return seqs.q1 ^ seqs.q2


def reconstruct_private(audit: bitarray, q2: bitarray) -> bitarray:
    """Reconstruct Q1 from the audit stream and the public sequence."""
    if len(audit) != len(q2):
        msg = f"Audit and public lengths differ: {len(audit)} != {len(q2)}"
        raise ParameterDomainError(msg)
    return audit ^ q2
