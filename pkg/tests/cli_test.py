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
"""Test the command line interface."""
import json
from pathlib import Path
from typing import Any
from typing import Dict

import pytest
from click.testing import CliRunner

from dqrng.about import __version__
from dqrng.cli import cli
from dqrng.enums import Role
from dqrng.files import read_bits
from dqrng.files import write_bits
from dqrng.helpers import bits_from_array
from dqrng.helpers import bits_from_string
from dqrng.sequences import reconstruct_private
from tests.base import TOKENS
from tests.base import Loopback
from tests.base import random_bits

TEST_CRITERIA_DOCUMENT = {"criteria_id": "test", "alpha": 1e-4, "min_bits": 1000}


def write_config(path: Path, **document: Any) -> Path:
    values: Dict[str, Any] = {
        "criteria_id": "test",
        "criteria": [TEST_CRITERIA_DOCUMENT],
    }
    values.update(document)
    path.write_text(json.dumps(values), encoding="utf-8")
    return path


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


class TestOfflineCommands:
    def test_simulate_encode_diagnose(self, runner: CliRunner, tmp_path: Path) -> None:
        events = tmp_path / "events.bin"

        simulated = runner.invoke(
            cli,
            ["simulate", "--pulses", "300000", "--seed", "1", "--out", str(events)],
        )
        encoded = runner.invoke(
            cli,
            [
                "encode",
                str(events),
                "--q1",
                str(tmp_path / "q1.bits"),
                "--q2",
                str(tmp_path / "q2.bits"),
                "--audit",
                str(tmp_path / "audit.bits"),
                "--no-gate",
            ],
        )
        diagnosed = runner.invoke(
            cli,
            [
                "diagnose",
                str(events),
                "--stability-csv",
                str(tmp_path / "stability.csv"),
                "--surface-csv",
                str(tmp_path / "surface.csv"),
            ],
        )

        assert simulated.exit_code == 0, simulated.output
        histogram = json.loads(simulated.stdout)["histogram"]
        assert sum(histogram) == 300_000
        assert encoded.exit_code == 0, encoded.output
        measurements = json.loads(encoded.stdout)["measurements"]
        assert measurements == histogram[1]
        q1 = read_bits(tmp_path / "q1.bits")
        q2 = read_bits(tmp_path / "q2.bits")
        assert len(q1) == len(q2) == measurements
        assert reconstruct_private(read_bits(tmp_path / "audit.bits"), q2) == q1
        assert diagnosed.exit_code == 0, diagnosed.output
        report = json.loads(diagnosed.stdout)
        assert sum(report["channel_counts"]) == report["histogram"][1]
        assert report["entropy_distance"] < report["max_entropy_distance"]
        assert report["mutual_information"] < 0.01
        surface = (tmp_path / "surface.csv").read_text().splitlines()
        assert len(surface) == 1 + 41 * 41
        assert (tmp_path / "stability.csv").exists()

    def test_gate_rejects_unbalanced_interval(
        self,
        runner: CliRunner,
        tmp_path: Path,
    ) -> None:
        config = write_config(
            tmp_path / "run.json",
            balance={"lo": 0.3, "hi": 0.4, "interval": 0.05},
        )
        events = tmp_path / "events.bin"
        runner.invoke(cli, ["simulate", "--pulses", "150000", "--out", str(events)])

        result = runner.invoke(
            cli,
            [
                "--config",
                str(config),
                "encode",
                str(events),
                "--q1",
                str(tmp_path / "q1.bits"),
                "--q2",
                str(tmp_path / "q2.bits"),
            ],
        )

        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout) == {"measurements": 0}

    def test_battery_and_extraction(self, runner: CliRunner, tmp_path: Path) -> None:
        config = write_config(tmp_path / "run.json")
        bits = tmp_path / "raw.bits"
        write_bits(bits, random_bits(20_000, seed=1))

        tested = runner.invoke(
            cli,
            [
                "--config",
                str(config),
                "test",
                str(bits),
                "--report",
                str(tmp_path / "report.json"),
                "--cdf-csv",
                str(tmp_path / "cdf.csv"),
            ],
        )
        extracted = runner.invoke(
            cli,
            [
                "extract",
                str(bits),
                "--out",
                str(tmp_path / "out.bits"),
                "--qber",
                "0.17",
                "--seed",
                "5",
            ],
        )

        assert tested.exit_code == 0, tested.output
        assert json.loads(tested.stdout)["verdict"] == "pass"
        assert (tmp_path / "report.json").exists()
        assert len((tmp_path / "cdf.csv").read_text().splitlines()) == 11
        assert extracted.exit_code == 0, extracted.output
        plan = json.loads(extracted.stdout)
        assert plan["qber"] == 0.17
        assert len(read_bits(tmp_path / "out.bits")) == plan["l_q"]
        manifest = json.loads((tmp_path / "out.bits.manifest.json").read_text())
        assert manifest["seed"] == 5

    def test_failing_battery(self, runner: CliRunner, tmp_path: Path) -> None:
        bits = tmp_path / "zeros.bits"
        write_bits(bits, bits_from_array([0] * 100_000))

        result = runner.invoke(cli, ["test", str(bits), "--criteria", "desk"])

        assert result.exit_code == 2
        assert '"error": "VerdictFailedError"' in result.output
        assert '"verdict": "fail"' in result.stdout

    def test_insufficient_entropy(self, runner: CliRunner, tmp_path: Path) -> None:
        bits = tmp_path / "short.bits"
        write_bits(bits, random_bits(100, seed=2))

        result = runner.invoke(
            cli,
            ["extract", str(bits), "--out", str(tmp_path / "out.bits")],
        )

        assert result.exit_code == 4
        assert "InsufficientEntropyError" in result.output
        assert not (tmp_path / "out.bits").exists()

    def test_export_to_stdout(self, runner: CliRunner, tmp_path: Path) -> None:
        bits = tmp_path / "bits.bits"
        write_bits(bits, bits_from_string("1010101010101010"))

        result = runner.invoke(cli, ["export", str(bits), "-"])

        assert result.exit_code == 0
        assert result.stdout_bytes == b"\xaa\xaa"

    def test_export_to_file(self, runner: CliRunner, tmp_path: Path) -> None:
        bits = tmp_path / "bits.bits"
        write_bits(bits, bits_from_string("111100001111"))

        result = runner.invoke(cli, ["export", str(bits), str(tmp_path / "raw")])

        assert result.exit_code == 0
        assert (tmp_path / "raw").read_bytes() == b"\xf0\xf0"
        assert json.loads((tmp_path / "raw.json").read_text())["bit_count"] == 12

    def test_version(self, runner: CliRunner) -> None:
        result = runner.invoke(cli, ["--version"])

        assert result.exit_code == 0
        assert __version__ in result.output

    def test_invalid_config(self, runner: CliRunner, tmp_path: Path) -> None:
        config = write_config(tmp_path / "run.json", colour="blue")
        bits = tmp_path / "bits.bits"
        write_bits(bits, random_bits(2_000, seed=3))

        result = runner.invoke(cli, ["--config", str(config), "test", str(bits)])

        assert result.exit_code == 1
        assert "ConfigurationError" in result.output

    def test_serve_needs_tokens(self, runner: CliRunner, tmp_path: Path) -> None:
        result = runner.invoke(cli, ["serve", "--storage", str(tmp_path)])

        assert result.exit_code == 2
        assert "token" in result.output


class TestRun:
    def test_loopback_run(self, runner: CliRunner, tmp_path: Path) -> None:
        config = write_config(
            tmp_path / "run.json",
            balance={"interval": 0.05, "max_intervals": 20},
            target_bits=50_000,
        )

        result = runner.invoke(
            cli,
            [
                "--config",
                str(config),
                "run",
                "--seed",
                "3",
                "--out-dir",
                str(tmp_path / "out"),
                "--loopback",
            ],
        )

        assert result.exit_code == 0, result.output
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["verdict"] == "pass"
        assert summary["l_q"] == len(read_bits(tmp_path / "out" / "extracted.bits"))

    def test_balance_never_achieved(self, runner: CliRunner, tmp_path: Path) -> None:
        config = write_config(
            tmp_path / "run.json",
            scheme={"channel_probs": [0.30, 0.24, 0.23, 0.23]},
            balance={"interval": 0.01, "max_intervals": 3},
        )

        result = runner.invoke(
            cli,
            [
                "--config",
                str(config),
                "run",
                "--out-dir",
                str(tmp_path / "out"),
                "--loopback",
            ],
        )

        assert result.exit_code == 3
        assert '"error": "BalanceNeverAchievedError"' in result.output


class TestRemoteCommands(Loopback):
    def test_submit_audit_and_verdict(self, tmp_path: Path) -> None:
        runner = CliRunner()
        endpoint = "{}:{}".format(*self.endpoint)
        q1 = random_bits(8_000, seed=10)
        q2 = random_bits(8_000, seed=11)
        write_bits(tmp_path / "q2.bits", q2)
        write_bits(tmp_path / "audit.bits", q1 ^ q2)

        submitted = runner.invoke(
            cli,
            [
                "submit",
                str(tmp_path / "q2.bits"),
                "--audit",
                str(tmp_path / "audit.bits"),
                "--endpoint",
                endpoint,
                "--token",
                TOKENS[Role.device],
                "--criteria",
                "test",
            ],
        )
        session_id = json.loads(submitted.stdout)["session_id"]
        audited = runner.invoke(
            cli,
            [
                "audit",
                session_id,
                "--endpoint",
                endpoint,
                "--token",
                TOKENS[Role.auditor],
                "--out",
                str(tmp_path / "retrieved.bits"),
                "--q2",
                str(tmp_path / "q2.bits"),
                "--q1-out",
                str(tmp_path / "q1.bits"),
            ],
        )
        fetched = runner.invoke(
            cli,
            [
                "verdict",
                session_id,
                "--endpoint",
                endpoint,
                "--token",
                TOKENS[Role.reader],
            ],
        )

        assert submitted.exit_code == 0, submitted.output
        assert audited.exit_code == 0, audited.output
        assert read_bits(tmp_path / "q1.bits") == q1
        assert fetched.exit_code == 0, fetched.output
        assert json.loads(fetched.stdout)["verdict"] == "pass"

    def test_unauthorized_audit(self, tmp_path: Path) -> None:
        runner = CliRunner()
        endpoint = "{}:{}".format(*self.endpoint)

        result = runner.invoke(
            cli,
            [
                "audit",
                "some-session",
                "--endpoint",
                endpoint,
                "--token",
                "forged",
                "--out",
                str(tmp_path / "audit.bits"),
            ],
        )

        assert result.exit_code == 5
        assert "AuthorizationError" in result.output

    def test_unreachable_verifier(self, tmp_path: Path) -> None:
        runner = CliRunner()
        write_bits(tmp_path / "q2.bits", random_bits(2_000, seed=12))
        self.server.stop()

        result = runner.invoke(
            cli,
            [
                "submit",
                str(tmp_path / "q2.bits"),
                "--endpoint",
                "{}:{}".format(*self.endpoint),
                "--token",
                TOKENS[Role.device],
            ],
        )

        assert result.exit_code == 5
        assert "ConnectionFailedError" in result.output
