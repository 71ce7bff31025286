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
Privacy amplification with seeded Toeplitz hashing.

A Toeplitz matrix ``T`` of ``out_len`` rows and ``in_len`` columns is defined by
``in_len + out_len - 1`` seed bits::

    T[i, j] = seed[out_len - 1 - i + j]

so its first row is ``seed[out_len - 1:]`` and its first column, read from the top,
is ``seed[:out_len]`` in reverse.  The hash of ``x`` is ``T x`` over GF(2).  Large
instances are computed as a convolution with `scipy.signal.fftconvolve`, small
ones as a dense product.

The raw string is hashed in blocks.  The extractable length of the whole string
is computed once and distributed over the blocks in proportion to their size.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np
from bitarray import bitarray
from scipy import linalg
from scipy import signal

from dqrng import config
from dqrng.exceptions import DimensionError
from dqrng.exceptions import FormatError
from dqrng.exceptions import ParameterDomainError
from dqrng.helpers import bits_from_array
from dqrng.helpers import bits_to_array
from dqrng.helpers import concat_bits
from dqrng.helpers import new_bits
from dqrng.photon_stats import ExtractionParams
from dqrng.photon_stats import NoiseModel
from dqrng.photon_stats import extractable_length
from dqrng.photon_stats import qber as model_qber
from dqrng.types import BitVector

__all__ = [
    "BlockLayout",
    "ExtractionPlan",
    "ToeplitzSeed",
    "extract",
    "extract_blocks",
    "manifest",
    "plan_extraction",
    "random_seed",
    "toeplitz_matrix",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToeplitzSeed:
    """Seed bits of one Toeplitz hash."""

    bits: bitarray
    in_len: int
    out_len: int

    def __post_init__(self) -> None:
        """Check the seed dimensions."""
        if self.in_len < 1 or not 0 <= self.out_len <= self.in_len:
            msg = (
                f"Need 0 <= out_len <= in_len and in_len >= 1, got "
                f"in_len={self.in_len}, out_len={self.out_len}"
            )
            raise DimensionError(msg)
        if len(self.bits) != self.length(self.in_len, self.out_len):
            msg = (
                f"A {self.out_len}x{self.in_len} Toeplitz matrix needs "
                f"{self.length(self.in_len, self.out_len)} seed bits, "
                f"got {len(self.bits)}"
            )
            raise DimensionError(msg)

    @staticmethod
    def length(in_len: int, out_len: int) -> int:
        """Return the number of seed bits of an ``out_len`` by ``in_len`` matrix."""
        return in_len + out_len - 1 if out_len else 0

    @classmethod
    def identity(cls, size: int) -> "ToeplitzSeed":
        """Return the seed of the ``size`` by ``size`` identity matrix."""
        values = np.zeros(2 * size - 1, dtype=np.uint8)
        values[size - 1] = 1
        return cls(bits=bits_from_array(values), in_len=size, out_len=size)


def random_seed(
    in_len: int,
    out_len: int,
    seed: int,
    block_index: int = 0,
) -> ToeplitzSeed:
    """
    Derive the Toeplitz seed of one block from a configured seed.

    Every block has its own stream, ``SeedSequence(seed, spawn_key=(block,))``, so
    seeds do not depend on how many blocks are hashed or in which order.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block_index,)))
    values = rng.integers(0, 2, ToeplitzSeed.length(in_len, out_len), dtype=np.uint8)
    return ToeplitzSeed(bits=bits_from_array(values), in_len=in_len, out_len=out_len)


def toeplitz_matrix(seed: ToeplitzSeed) -> BitVector:
    """Return the dense matrix of a seed, for small instances."""
    values = bits_to_array(seed.bits)
    column = values[: seed.out_len][::-1]
    row = values[seed.out_len - 1 :]
    return np.asarray(linalg.toeplitz(column, row), dtype=np.uint8)


def _hash(values: BitVector, seed: ToeplitzSeed) -> BitVector:
    n, m = seed.in_len, seed.out_len
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    if n * m <= config.DIRECT_PRODUCT_LIMIT:
        product = toeplitz_matrix(seed).astype(np.int64) @ values.astype(np.int64)
        return (product & 1).astype(np.uint8)
    seed_values = bits_to_array(seed.bits).astype(np.float64)
    convolution = signal.fftconvolve(seed_values, values[::-1].astype(np.float64))
    window = np.rint(convolution[n - 1 : n + m - 1][::-1]).astype(np.int64)
    return (window & 1).astype(np.uint8)


def extract(bits: bitarray, seed: ToeplitzSeed) -> bitarray:
    """
    Hash ``bits`` with the Toeplitz matrix of ``seed``.

    Raises
    ------
    DimensionError
        If the input length differs from the seed's ``in_len``.

    """
    if len(bits) != seed.in_len:
        msg = f"Seed expects {seed.in_len} input bits, got {len(bits)}"
        raise DimensionError(msg)
    return bits_from_array(_hash(bits_to_array(bits), seed))


@dataclass(frozen=True)
class BlockLayout:
    """Input range and output length of one block."""

    index: int
    start: int
    in_len: int
    out_len: int


@dataclass(frozen=True)
class ExtractionPlan:
    """Extractable length of a raw string and its distribution over blocks."""

    params: ExtractionParams
    length: int
    blocks: Tuple[BlockLayout, ...]
    block_size: int

    @property
    def rate(self) -> float:
        """Return the compression rate ``R = l_q / T``."""
        return self.length / self.params.raw_len

    def to_dict(self) -> Dict[str, Any]:
        return {
            "raw_len": self.params.raw_len,
            "qber": self.params.qber,
            "epsilon": self.params.epsilon,
            "length": self.length,
            "rate": self.rate,
            "block_size": self.block_size,
            "blocks": [
                {
                    "index": block.index,
                    "start": block.start,
                    "in_len": block.in_len,
                    "out_len": block.out_len,
                }
                for block in self.blocks
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExtractionPlan":
        try:
            params = ExtractionParams(
                raw_len=int(data["raw_len"]),
                qber=float(data["qber"]),
                epsilon=float(data["epsilon"]),
            )
            blocks = tuple(BlockLayout(**block) for block in data["blocks"])
            return cls(
                params=params,
                length=int(data["length"]),
                blocks=blocks,
                block_size=int(data["block_size"]),
            )
        except (KeyError, TypeError) as error:
            msg = f"Malformed extraction plan: {error}"
            raise FormatError(msg) from error


def _layout(raw_len: int, length: int, block_size: int) -> Tuple[BlockLayout, ...]:
    starts = list(range(0, raw_len, block_size))
    sizes = [min(block_size, raw_len - start) for start in starts]
    outputs = [length * size // raw_len for size in sizes]
    # the rounding remainder is smaller than the number of blocks
    for index in range(length - sum(outputs)):
        outputs[index] += 1
    return tuple(
        BlockLayout(index=i, start=start, in_len=size, out_len=out)
        for i, (start, size, out) in enumerate(zip(starts, sizes, outputs))
    )


def plan_extraction(
    raw_len: int,
    model: Optional[NoiseModel] = None,
    epsilon: float = config.DEFAULT_EPSILON,
    *,
    qber: Optional[float] = None,
    block_size: int = config.TOEPLITZ_BLOCK,
) -> ExtractionPlan:
    """
    Plan the extraction of ``raw_len`` raw bits.

    The QBER is computed from ``model`` unless given directly as ``qber``.  The
    security penalty is subtracted once from the whole string, and the output
    length of every block is proportional to its input length, so the block
    outputs add up to exactly ``l_q``.

    Raises
    ------
    InsufficientEntropyError
        If ``l_q`` is not positive.

    """
    if block_size < 1:
        msg = f"Block size must be positive, got {block_size}"
        raise ParameterDomainError(msg)
    if qber is None:
        if model is None:
            msg = "Either a noise model or a QBER is required"
            raise ParameterDomainError(msg)
        qber = model_qber(model)
    params = ExtractionParams(raw_len=raw_len, qber=qber, epsilon=epsilon)
    length = extractable_length(params)
    plan = ExtractionPlan(
        params=params,
        length=length,
        blocks=_layout(raw_len, length, block_size),
        block_size=block_size,
    )
    logger.info(
        "Extraction plan: T=%d Q=%.6f l_q=%d R=%.6f in %d blocks",
        raw_len,
        qber,
        length,
        plan.rate,
        len(plan.blocks),
    )
    return plan


def extract_blocks(
    bits: bitarray,
    plan: ExtractionPlan,
    seed: int,
    *,
    workers: int = 1,
) -> bitarray:
    """
    Hash ``bits`` block by block following ``plan``.

    Blocks may be hashed concurrently, the output is concatenated in block order.

    Raises
    ------
    DimensionError
        If ``bits`` is not as long as the planned raw string.

    """
    if len(bits) != plan.params.raw_len:
        msg = f"Plan expects {plan.params.raw_len} raw bits, got {len(bits)}"
        raise DimensionError(msg)

    def run(block: BlockLayout) -> bitarray:
        if block.out_len == 0:
            return new_bits()
        block_seed = random_seed(block.in_len, block.out_len, seed, block.index)
        return extract(bits[block.start : block.start + block.in_len], block_seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts: List[bitarray] = list(pool.map(run, plan.blocks))
    else:
        parts = [run(block) for block in plan.blocks]
    output = concat_bits(parts)
    logger.debug("Extracted %d bits from %d", len(output), len(bits))
    return output


def manifest(
    plan: ExtractionPlan,
    seed: int,
    *,
    output_digest: Optional[str] = None,
) -> str:
    """Return the JSON manifest stored next to an extracted bit file."""
    document = {
        "extractor": "toeplitz",
        "seed": seed,
        "seed_derivation": "numpy SeedSequence(seed, spawn_key=(block,))",
        "plan": plan.to_dict(),
        "output_sha256": output_digest,
        "log2_epsilon": math.log2(plan.params.epsilon),
    }
    return json.dumps(document, indent=2, sort_keys=True)
