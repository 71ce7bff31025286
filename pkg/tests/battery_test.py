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
"""Test the statistical battery."""
import numpy as np
import pytest

from dqrng.battery import TESTS
from dqrng.battery import TestReport
from dqrng.battery import pvalue_cdf
from dqrng.battery import pvalue_cdf_uniformity
from dqrng.battery import run_battery
from dqrng.exceptions import CriteriaRejectedError
from dqrng.exceptions import FormatError
from dqrng.exceptions import InsufficientDataError
from dqrng.helpers import bits_from_array
from dqrng.helpers import bits_from_string
from dqrng.registry import ALL_TESTS
from dqrng.registry import Criteria
from tests.base import TEST_CRITERIA
from tests.base import random_bits

MONOBIT = Criteria("monobit", tests=("monobit",), min_bits=1)
PI_BITS = (
    "11001001000011111101101010100010001000010110100011000010001101001100"
    "01001100011001100010100010111000"
)
LONGEST_RUN_BITS = (
    "11001100000101010110110001001100111000000000001001001101010100010001"
    "001111010110100000001101011111001100111001101101100010110010"
)


def entry(report: TestReport, name: str) -> tuple:
    found = [e for e in report.entries if e.name == name]
    assert len(found) == 1
    return found[0].p_values, found[0].passed


class TestMonobit:
    def test_short_sequence(self) -> None:
        report = run_battery(bits_from_string("1011010101"), MONOBIT)

        assert report.p_values == pytest.approx([0.527089], abs=1e-5)
        assert report.battery_pass
        assert report.ks_statistic is None
        assert report.ks_pass is None

    def test_accepts_arrays(self) -> None:
        report = run_battery(np.array([1, 0, 1, 1, 0, 1, 0, 1, 0, 1]), MONOBIT)

        assert report.p_values == pytest.approx([0.527089], abs=1e-5)


class TestKnownAnswers:
    """Short worked examples with known statistics and p-values."""

    @pytest.mark.parametrize(
        ("bits", "name", "changes", "expected", "tolerance"),
        [
            (PI_BITS, "monobit", {}, (0.109599,), 1e-6),
            (PI_BITS, "block_frequency", {"block_size": 10}, (0.706438,), 1e-6),
            (PI_BITS, "runs", {}, (0.500798,), 1e-6),
            (LONGEST_RUN_BITS, "longest_run", {}, (0.180609,), 1e-4),
            ("0011011101", "serial", {"serial_block": 3}, (0.808792, 0.670320), 1e-6),
            (PI_BITS, "approximate_entropy", {"apen_block": 2}, (0.235301,), 1e-6),
            (PI_BITS, "cumulative_sums", {}, (0.219194, 0.114866), 5e-4),
            (PI_BITS, "spectral", {}, (0.646355,), 1e-6),
        ],
    )
    def test_p_values(
        self,
        bits: str,
        name: str,
        changes: dict,
        expected: tuple,
        tolerance: float,
    ) -> None:
        criteria = Criteria(name, tests=(name,), min_bits=1, **changes)

        report = run_battery(bits_from_string(bits), criteria)

        assert report.p_values == pytest.approx(list(expected), abs=tolerance)

    @pytest.mark.parametrize(
        ("bits", "name", "changes", "parameters"),
        [
            (PI_BITS, "monobit", {}, {"n": 100, "sum": -16}),
            (PI_BITS, "runs", {}, {"n": 100, "runs": 52}),
            (PI_BITS, "cumulative_sums", {}, {"forward": 16, "backward": 19}),
            (PI_BITS, "spectral", {}, {"peaks_below": 48}),
        ],
    )
    def test_statistics(
        self,
        bits: str,
        name: str,
        changes: dict,
        parameters: dict,
    ) -> None:
        criteria = Criteria(name, tests=(name,), min_bits=1, **changes)

        (result,) = run_battery(bits_from_string(bits), criteria).entries

        assert result.parameters == parameters

    def test_approximate_entropy_statistic(self) -> None:
        criteria = Criteria("apen", tests=("approximate_entropy",), min_bits=1)

        (result,) = run_battery(bits_from_string(PI_BITS), criteria).entries

        assert result.parameters["apen"] == pytest.approx(0.665393, abs=1e-6)


class TestBattery:
    def test_alternating_sequence(self) -> None:
        bits = bits_from_array(np.tile([0, 1], 500_000))

        report = run_battery(bits)

        assert entry(report, "monobit") == ((1.0,), True)
        p_values, passed = entry(report, "runs")
        assert p_values[0] < 1e-10
        assert not passed
        assert not report.battery_pass

    def test_all_zeros(self) -> None:
        bits = bits_from_array(np.zeros(10**6, dtype=np.uint8))

        report = run_battery(bits)

        p_values, passed = entry(report, "monobit")
        assert p_values[0] < 1e-10
        assert not passed
        assert not report.battery_pass

    def test_random_sequence_passes(self) -> None:
        report = run_battery(random_bits(200_000, seed=21), TEST_CRITERIA)

        assert [e.name for e in report.entries] == list(ALL_TESTS)
        assert report.battery_pass
        assert report.ks_statistic is not None
        assert report.passed(require_uniformity=True)

    def test_p_values_are_probabilities(self) -> None:
        report = run_battery(random_bits(50_000, seed=22), TEST_CRITERIA)

        assert len(report.p_values) == 10
        assert all(0.0 <= p <= 1.0 for p in report.p_values)

    def test_biased_sequence_fails(self) -> None:
        rng = np.random.default_rng(23)
        bits = bits_from_array(rng.random(200_000) < 0.52)

        report = run_battery(bits, TEST_CRITERIA)

        assert not entry(report, "monobit")[1]
        assert not report.passed()

    def test_workers_give_the_same_report(self) -> None:
        bits = random_bits(50_000, seed=24)

        assert run_battery(bits, TEST_CRITERIA, workers=4) == run_battery(
            bits,
            TEST_CRITERIA,
        )

    def test_too_short_names_the_test(self) -> None:
        with pytest.raises(InsufficientDataError, match="monobit"):
            run_battery(random_bits(1000, seed=25))

    def test_too_short_for_a_block_test(self) -> None:
        criteria = Criteria("tiny", tests=("longest_run",), min_bits=1)

        with pytest.raises(InsufficientDataError, match="longest_run"):
            run_battery(random_bits(100, seed=26), criteria)

    def test_criteria_by_id(self) -> None:
        with pytest.raises(CriteriaRejectedError):
            run_battery(random_bits(100, seed=27), "no-such-criteria")

    def test_every_test_is_registered(self) -> None:
        assert set(TESTS) == set(ALL_TESTS)

    def test_cumulative_sums_has_two_directions(self) -> None:
        report = run_battery(random_bits(10_000, seed=28), TEST_CRITERIA)

        p_values, _ = entry(report, "cumulative_sums")

        assert len(p_values) == 2
        assert len(entry(report, "serial")[0]) == 2


class TestReportDocument:
    def test_json(self) -> None:
        report = run_battery(random_bits(5_000, seed=29), TEST_CRITERIA)

        document = report.to_dict()

        assert TestReport.from_json(report.to_json()) == report
        assert document["entries"][0]["name"] == "monobit"
        assert "pass" in document["entries"][0]

    def test_malformed(self) -> None:
        with pytest.raises(FormatError):
            TestReport.from_json("{")
        with pytest.raises(FormatError):
            TestReport.from_dict({"entries": []})

    def test_uniformity_policy(self) -> None:
        report = run_battery(random_bits(5_000, seed=30), TEST_CRITERIA)
        failing_ks = TestReport(
            entries=report.entries,
            battery_pass=True,
            ks_statistic=0.9,
            ks_pass=False,
            alpha=report.alpha,
        )

        assert failing_ks.passed()
        assert not failing_ks.passed(require_uniformity=True)


class TestUniformity:
    def test_point_mass(self) -> None:
        statistic, passed = pvalue_cdf_uniformity([0.5] * 20)

        assert statistic == pytest.approx(0.5)
        assert not passed

    def test_uniform_grid(self) -> None:
        values = [i / 101 for i in range(1, 101)]

        statistic, passed = pvalue_cdf_uniformity(values)

        assert statistic == pytest.approx(1 / 101)
        assert passed

    @pytest.mark.parametrize("values", [[], [0.1, 0.2, 0.3, 0.4]])
    def test_too_few(self, values: list) -> None:
        with pytest.raises(InsufficientDataError):
            pvalue_cdf_uniformity(values)

    def test_cdf(self) -> None:
        ordered, empirical, ideal = pvalue_cdf([0.8, 0.2, 0.5, 0.1])

        assert ordered.tolist() == [0.1, 0.2, 0.5, 0.8]
        assert empirical.tolist() == [0.25, 0.5, 0.75, 1.0]
        assert ideal.tolist() == ordered.tolist()
