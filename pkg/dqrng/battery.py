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
Statistical battery for the public sequence.

The battery is a self-contained set of frequency, runs, serial, entropy and
spectral tests in the style of the NIST SP 800-22 suite.  Each test turns the
sequence into one or more p-values; a test passes when all of its p-values reach
the significance level.  The p-values of a run can be checked for uniformity
with a one-sample Kolmogorov-Smirnov test.

Incomplete final blocks are discarded, never padded.
"""
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from bitarray import bitarray
from scipy import special
from scipy import stats

from dqrng import config
from dqrng.exceptions import FormatError
from dqrng.exceptions import InsufficientDataError
from dqrng.helpers import bits_to_array
from dqrng.registry import Criteria
from dqrng.registry import registry
from dqrng.types import BitVector
from dqrng.types import FloatArray

__all__ = [
    "TestEntry",
    "TestReport",
    "check_length",
    "pvalue_cdf",
    "pvalue_cdf_uniformity",
    "run_battery",
]

logger = logging.getLogger(__name__)

Bits = Union[bitarray, BitVector, Sequence[int]]
TestResult = Tuple[List[float], Dict[str, Any]]
TestFunction = Callable[[BitVector, Criteria], TestResult]

# (block length, lower class bound, upper class bound, class probabilities)
LONGEST_RUN_TABLES = (
    (128, 8, 1, 4, (0.2148, 0.3672, 0.2305, 0.1875)),
    (6272, 128, 4, 9, (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (
        750_000,
        10_000,
        10,
        16,
        (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727),
    ),
)
SPECTRAL_THRESHOLD = 0.95


@dataclass(frozen=True)
class TestEntry:
    """Result of one test of the battery."""

    __test__ = False

    name: str
    parameters: Dict[str, Any]
    p_values: Tuple[float, ...]
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        """Return the entry as a JSON compatible dict."""
        return {
            "name": self.name,
            "parameters": dict(self.parameters),
            "p_values": list(self.p_values),
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TestEntry":
        """Create an entry from the dict written by ``to_dict``."""
        return cls(
            name=data["name"],
            parameters=dict(data["parameters"]),
            p_values=tuple(float(p) for p in data["p_values"]),
            passed=bool(data["pass"]),
        )


@dataclass(frozen=True)
class TestReport:
    """
    Result of a battery run.

    ``ks_statistic`` and ``ks_pass`` are ``None`` when the run produced fewer
    p-values than the uniformity check needs.
    """

    __test__ = False

    entries: Tuple[TestEntry, ...]
    battery_pass: bool
    ks_statistic: Optional[float]
    ks_pass: Optional[bool]
    alpha: float

    @property
    def p_values(self) -> List[float]:
        """All p-values in battery order."""
        return [p for entry in self.entries for p in entry.p_values]

    def passed(self, *, require_uniformity: bool = False) -> bool:
        """Return the verdict of the report under the given policy."""
        if not require_uniformity:
            return self.battery_pass
        return self.battery_pass and bool(self.ks_pass)

    def to_dict(self) -> Dict[str, Any]:
        """Return the report as a JSON compatible dict."""
        return {
            "entries": [entry.to_dict() for entry in self.entries],
            "battery_pass": self.battery_pass,
            "ks_statistic": self.ks_statistic,
            "ks_pass": self.ks_pass,
            "alpha": self.alpha,
        }

    def to_json(self, *, indent: Optional[int] = None) -> str:
        """Serialize the report, keys sorted so equal reports give equal text."""
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TestReport":
        """Create a report from the dict written by ``to_dict``."""
        try:
            return cls(
                entries=tuple(TestEntry.from_dict(entry) for entry in data["entries"]),
                battery_pass=bool(data["battery_pass"]),
                ks_statistic=data["ks_statistic"],
                ks_pass=data["ks_pass"],
                alpha=float(data["alpha"]),
            )
        except (KeyError, TypeError) as error:
            msg = f"Malformed test report: {error}"
            raise FormatError(msg) from error

    @classmethod
    def from_json(cls, text: Union[str, bytes]) -> "TestReport":
        """Parse a report written by ``to_json``."""
        try:
            data = json.loads(text)
        except ValueError as error:
            msg = f"Test report is not valid JSON: {error}"
            raise FormatError(msg) from error
        return cls.from_dict(data)


def _clip(p_value: float) -> float:
    return float(min(max(p_value, 0.0), 1.0))


def monobit(bits: BitVector, criteria: Criteria) -> TestResult:  # noqa: ARG001
    """Frequency of ones over the whole sequence."""
    n = bits.size
    s = 2 * int(np.count_nonzero(bits)) - n
    return [_clip(math.erfc(abs(s) / math.sqrt(2 * n)))], {"n": n, "sum": s}


def block_frequency(bits: BitVector, criteria: Criteria) -> TestResult:
    """Frequency of ones within blocks of ``criteria.block_size`` bits."""
    size = criteria.block_size
    count = bits.size // size
    proportions = bits[: count * size].reshape(count, size).mean(axis=1)
    chi_squared = 4.0 * size * float(np.sum((proportions - 0.5) ** 2))
    p_value = special.gammaincc(count / 2.0, chi_squared / 2.0)
    return [_clip(p_value)], {"block_size": size, "blocks": count}


def runs(bits: BitVector, criteria: Criteria) -> TestResult:  # noqa: ARG001
    """Number of uninterrupted runs of identical bits."""
    n = bits.size
    pi = np.count_nonzero(bits) / n
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        # frequency prerequisite failed
        return [0.0], {"n": n, "runs": None}
    observed = int(np.count_nonzero(np.diff(bits))) + 1
    spread = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    p_value = math.erfc(abs(observed - 2.0 * n * pi * (1.0 - pi)) / spread)
    return [_clip(p_value)], {"n": n, "runs": observed}


def _longest_runs(blocks: BitVector) -> BitVector:
    """Longest run of ones in every row."""
    rows, width = blocks.shape
    framed = np.zeros((rows, width + 2), dtype=np.int8)
    framed[:, 1:-1] = blocks
    steps = np.diff(framed.ravel())
    starts = np.flatnonzero(steps == 1)
    ends = np.flatnonzero(steps == -1)
    longest = np.zeros(rows, dtype=np.int64)
    np.maximum.at(longest, starts // (width + 2), ends - starts)
    return longest


def longest_run(bits: BitVector, criteria: Criteria) -> TestResult:  # noqa: ARG001
    """Longest run of ones within blocks, against the tabulated distribution."""
    n = bits.size
    table = None
    for minimum, size, lo, hi, probs in LONGEST_RUN_TABLES:
        if n >= minimum:
            table = (size, lo, hi, probs)
    if table is None:
        msg = f"longest_run needs at least {LONGEST_RUN_TABLES[0][0]} bits, got {n}"
        raise InsufficientDataError(msg)
    size, lo, hi, probs = table
    count = n // size
    longest = _longest_runs(bits[: count * size].reshape(count, size))
    classes = np.clip(longest, lo, hi) - lo
    observed = np.bincount(classes, minlength=len(probs))
    expected = count * np.asarray(probs)
    chi_squared = float(np.sum((observed - expected) ** 2 / expected))
    p_value = special.gammaincc((len(probs) - 1) / 2.0, chi_squared / 2.0)
    return [_clip(p_value)], {"block_size": size, "blocks": count}


def _pattern_counts(bits: BitVector, length: int) -> BitVector:
    """Counts of all overlapping ``length`` bit patterns, the sequence wrapped."""
    if length == 0:
        return np.array([bits.size], dtype=np.int64)
    extended = np.concatenate([bits, bits[: length - 1]]).astype(np.int64)
    values = np.zeros(bits.size, dtype=np.int64)
    for offset in range(length):
        values = (values << 1) | extended[offset : offset + bits.size]
    return np.bincount(values, minlength=1 << length)


def _psi_squared(bits: BitVector, length: int) -> float:
    counts = _pattern_counts(bits, length).astype(np.float64)
    return float((1 << length) / bits.size * np.sum(counts**2) - bits.size)


def serial(bits: BitVector, criteria: Criteria) -> TestResult:
    """Frequency of all overlapping patterns of ``criteria.serial_block`` bits."""
    m = criteria.serial_block
    psi = [_psi_squared(bits, length) for length in (m, m - 1, m - 2)]
    delta = psi[0] - psi[1]
    delta_squared = psi[0] - 2.0 * psi[1] + psi[2]
    p_values = [
        special.gammaincc(2.0 ** (m - 2), delta / 2.0),
        special.gammaincc(2.0 ** (m - 3), delta_squared / 2.0),
    ]
    return [_clip(p) for p in p_values], {"m": m}


def _phi(bits: BitVector, length: int) -> float:
    counts = _pattern_counts(bits, length)
    frequencies = counts[counts > 0] / bits.size
    return float(np.sum(frequencies * np.log(frequencies)))


def approximate_entropy(bits: BitVector, criteria: Criteria) -> TestResult:
    """Compare the frequencies of overlapping patterns of two consecutive lengths."""
    m = criteria.apen_block
    n = bits.size
    apen = _phi(bits, m) - _phi(bits, m + 1)
    chi_squared = 2.0 * n * (math.log(2.0) - apen)
    p_value = special.gammaincc(2.0 ** (m - 1), chi_squared / 2.0)
    return [_clip(p_value)], {"m": m, "apen": apen}


def _cusum_p_value(z: int, n: int) -> float:
    if z == 0:
        return 1.0
    root = math.sqrt(n)
    first = np.arange(math.trunc((-n / z + 1) / 4), math.trunc((n / z - 1) / 4) + 1)
    second = np.arange(math.trunc((-n / z - 3) / 4), math.trunc((n / z - 1) / 4) + 1)
    cdf = stats.norm.cdf
    total = 1.0
    total -= float(
        np.sum(cdf((4 * first + 1) * z / root) - cdf((4 * first - 1) * z / root)),
    )
    total += float(
        np.sum(cdf((4 * second + 3) * z / root) - cdf((4 * second + 1) * z / root)),
    )
    return _clip(total)


def cumulative_sums(bits: BitVector, criteria: Criteria) -> TestResult:  # noqa: ARG001
    """Maximal excursion of the random walk, forward and backward."""
    n = bits.size
    walk = np.cumsum(2 * bits.astype(np.int64) - 1)
    forward = int(np.max(np.abs(walk)))
    backward = int(np.max(np.abs(walk[-1] - np.concatenate([[0], walk[:-1]]))))
    return (
        [_cusum_p_value(forward, n), _cusum_p_value(backward, n)],
        {"forward": forward, "backward": backward},
    )


def spectral(bits: BitVector, criteria: Criteria) -> TestResult:  # noqa: ARG001
    """Discrete Fourier transform test for periodic features."""
    n = bits.size
    modulus = np.abs(np.fft.fft(2.0 * bits - 1.0)[: n // 2])
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    expected = SPECTRAL_THRESHOLD * n / 2.0
    observed = int(np.count_nonzero(modulus < threshold))
    d = (observed - expected) / math.sqrt(
        n * SPECTRAL_THRESHOLD * (1 - SPECTRAL_THRESHOLD) / 4.0,
    )
    return [_clip(math.erfc(abs(d) / math.sqrt(2.0)))], {"peaks_below": observed}


TESTS: Dict[str, TestFunction] = {
    "monobit": monobit,
    "block_frequency": block_frequency,
    "runs": runs,
    "longest_run": longest_run,
    "serial": serial,
    "approximate_entropy": approximate_entropy,
    "cumulative_sums": cumulative_sums,
    "spectral": spectral,
}


def _minimum_bits(name: str, criteria: Criteria) -> int:
    """Smallest sequence the statistic of a test is defined for."""
    if name == "block_frequency":
        return criteria.block_size
    if name == "longest_run":
        return LONGEST_RUN_TABLES[0][0]
    if name == "serial":
        return 1 << criteria.serial_block
    if name == "approximate_entropy":
        return 1 << (criteria.apen_block + 1)
    if name == "spectral":
        return 2
    return 1


def check_length(length: int, criteria: Criteria) -> None:
    """
    Check that a sequence of ``length`` bits is long enough for every test.

    Raises
    ------
    InsufficientDataError
        Naming the first selected test the sequence is too short for.

    """
    for name in criteria.tests:
        needed = max(criteria.min_bits, _minimum_bits(name, criteria))
        if length < needed:
            msg = f"Test {name} needs at least {needed} bits, got {length}"
            raise InsufficientDataError(msg)


def as_bit_vector(bits: Bits) -> BitVector:
    """Return the bits as a uint8 array of zeros and ones."""
    if isinstance(bits, bitarray):
        return bits_to_array(bits)
    return (np.asarray(bits) != 0).astype(np.uint8)


def run_battery(
    bits: Bits,
    criteria: Union[Criteria, str] = "default",
    *,
    workers: int = 1,
) -> TestReport:
    """
    Run the battery selected by ``criteria`` on ``bits``.

    Parameters
    ----------
    bits : bitarray or array of 0/1
        The sequence under test.
    criteria : Criteria or str
        The criteria, or the id of registered criteria.
    workers : int
        Number of tests run concurrently.  The report is ordered by the test list
        of the criteria regardless.

    Raises
    ------
    InsufficientDataError
        If the sequence is shorter than the criteria minimum or than a selected
        test needs.  The message names the test.

    """
    if isinstance(criteria, str):
        criteria = registry.get(criteria)
    vector = as_bit_vector(bits)
    check_length(vector.size, criteria)
    logger.info(
        "Running %d tests of criteria %r on %d bits",
        len(criteria.tests),
        criteria.criteria_id,
        vector.size,
    )

    def run(name: str) -> TestResult:
        return TESTS[name](vector, criteria)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, criteria.tests))
    else:
        results = [run(name) for name in criteria.tests]
    entries = []
    for name, (p_values, parameters) in zip(criteria.tests, results):
        passed = all(p >= criteria.alpha for p in p_values)
        if not passed:
            logger.info("Test %s failed with p-values %s", name, p_values)
        entries.append(
            TestEntry(
                name=name,
                parameters=parameters,
                p_values=tuple(p_values),
                passed=passed,
            ),
        )
    p_all = [p for p_values, _ in results for p in p_values]
    ks_statistic: Optional[float] = None
    ks_pass: Optional[bool] = None
    if len(p_all) >= config.MIN_UNIFORMITY_VALUES:
        ks_statistic, ks_pass = pvalue_cdf_uniformity(p_all, alpha=criteria.alpha)
    return TestReport(
        entries=tuple(entries),
        battery_pass=all(entry.passed for entry in entries),
        ks_statistic=ks_statistic,
        ks_pass=ks_pass,
        alpha=criteria.alpha,
    )


def pvalue_cdf_uniformity(
    p_values: Sequence[float],
    *,
    alpha: float = config.DEFAULT_ALPHA,
) -> Tuple[float, bool]:
    """
    Kolmogorov-Smirnov test of p-values against the uniform distribution.

    Returns the KS statistic and whether the KS p-value reaches ``alpha``.

    Raises
    ------
    InsufficientDataError
        If fewer than five p-values are given.

    """
    if len(p_values) < config.MIN_UNIFORMITY_VALUES:
        msg = (
            f"Uniformity check needs at least {config.MIN_UNIFORMITY_VALUES} "
            f"p-values, got {len(p_values)}"
        )
        raise InsufficientDataError(msg)
    result = stats.kstest(np.asarray(p_values, dtype=np.float64), "uniform")
    statistic = float(result.statistic)
    logger.debug("KS statistic %.6f, p-value %.6g", statistic, result.pvalue)
    return statistic, bool(result.pvalue >= alpha)


def pvalue_cdf(p_values: Sequence[float]) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """
    Empirical CDF of p-values next to the ideal uniform CDF.

    Returns the sorted p-values, the empirical CDF at each of them and the ideal
    CDF, which is the p-value itself.
    """
    ordered = np.sort(np.asarray(p_values, dtype=np.float64))
    empirical = np.arange(1, ordered.size + 1) / max(ordered.size, 1)
    return ordered, empirical, ordered.copy()
