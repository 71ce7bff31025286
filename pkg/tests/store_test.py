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
"""Test the persistent session store."""
import json
from pathlib import Path

import arrow
import pytest

from dqrng.battery import run_battery
from dqrng.enums import Phase
from dqrng.enums import Verdict
from dqrng.exceptions import NotFoundError
from dqrng.protocol import SessionState
from dqrng.registry import CriteriaRegistry
from dqrng.store import SessionStore
from tests.base import TEST_CRITERIA
from tests.base import random_bits


def finished_session(store: SessionStore, seed: int = 1) -> SessionState:
    bits = random_bits(5_000, seed=seed)
    state = SessionState(declared_len=len(bits), criteria_id=TEST_CRITERIA.criteria_id)
    state.phase = Phase.VERDICT
    state.received_len = len(bits)
    state.verdict = Verdict.passed
    store.record(state, bits=bits, report=run_battery(bits, TEST_CRITERIA))
    return state


class TestSessionStore:
    def test_record_and_reload(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = finished_session(store)

        reopened = SessionStore(tmp_path)

        assert reopened.session(state.session_id) == state
        assert reopened.bits(state.session_id) == random_bits(5_000, seed=1)
        assert reopened.report(state.session_id) == store.report(state.session_id)
        assert [s.session_id for s in reopened.sessions()] == [state.session_id]

    def test_latest_snapshot_wins(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = SessionState(declared_len=8, criteria_id="default")
        store.record(state)

        state.phase = Phase.STREAMING
        state.abort("incomplete stream: 0 of 8 bits received")
        store.record(state)

        loaded = SessionStore(tmp_path).session(state.session_id)
        assert loaded.phase == Phase.STREAMING
        assert loaded.error is not None
        assert len(store.entries()) == 2

    def test_blobs_are_content_addressed(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        bits = random_bits(100, seed=2)

        store.record(SessionState(declared_len=100, criteria_id="default"), bits=bits)
        store.record(SessionState(declared_len=100, criteria_id="default"), bits=bits)

        assert len(list((tmp_path / "blobs").glob("*.bits"))) == 1

    def test_unknown_session(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)

        with pytest.raises(NotFoundError, match="Unknown session"):
            store.session("nope")
        with pytest.raises(NotFoundError):
            store.bits("nope")

    def test_no_report_yet(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = SessionState(declared_len=8, criteria_id="default")
        store.record(state)

        with pytest.raises(NotFoundError, match="no verdict"):
            store.report(state.session_id)
        with pytest.raises(NotFoundError, match="no stored bits"):
            store.bits(state.session_id)

    def test_audit(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = finished_session(store)
        audit = random_bits(5_000, seed=3)
        before = arrow.utcnow()

        record = store.record_audit(state.session_id, audit)

        assert record.bits == audit
        assert record.retained_at >= before.shift(seconds=-1)
        assert SessionStore(tmp_path).audit(state.session_id).bits == audit

    def test_missing_audit(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = finished_session(store)

        with pytest.raises(NotFoundError, match="no audit"):
            store.audit(state.session_id)

    def test_replay(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = finished_session(store, seed=4)
        criteria = CriteriaRegistry()
        criteria.register(TEST_CRITERIA)

        replayed = store.replay(state.session_id, criteria)

        assert replayed == store.report(state.session_id)

    def test_missing_blob(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        state = finished_session(store)
        for blob in (tmp_path / "blobs").glob("*.bits"):
            blob.unlink()

        with pytest.raises(NotFoundError, match="missing"):
            store.bits(state.session_id)


class TestHashChain:
    def test_intact_chain(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        for seed in range(3):
            finished_session(store, seed=seed)

        assert store.verify_chain() == []
        entries = store.entries()
        assert entries[0]["prev_hash"] == "0" * 64
        assert entries[1]["prev_hash"] == entries[0]["hash"]

    def test_tampered_entry(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        for seed in range(3):
            finished_session(store, seed=seed)
        lines = store.log_path.read_text().splitlines()
        entry = json.loads(lines[1])
        entry["data"]["state"]["verdict"] = "fail"
        lines[1] = json.dumps(entry, sort_keys=True)
        store.log_path.write_text("\n".join(lines) + "\n")

        issues = store.verify_chain()

        assert issues == ["Hash mismatch at entry 2"]

    def test_removed_entry(self, tmp_path: Path) -> None:
        store = SessionStore(tmp_path)
        for seed in range(3):
            finished_session(store, seed=seed)
        lines = store.log_path.read_text().splitlines()
        del lines[1]
        store.log_path.write_text("\n".join(lines) + "\n")

        assert store.verify_chain() == ["Chain broken at entry 2"]

    def test_new_entries_continue_the_chain(self, tmp_path: Path) -> None:
        finished_session(SessionStore(tmp_path))

        reopened = SessionStore(tmp_path)
        finished_session(reopened, seed=2)

        assert reopened.verify_chain() == []
