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
The delegated verification protocol loop.

1. Measure control intervals and keep those whose channel frequencies pass the
   balance gate, building the private and public sequences.
2. Submit the public sequence to the verifier.
3. Only when the verdict is a pass, compress the private sequence to its
   extractable length.

All artifacts and a machine readable summary are written to the output
directory.
"""
import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any
from typing import Callable
from typing import Dict
from typing import Optional

import numpy as np
from bitarray import bitarray

from dqrng import config
from dqrng.client import Submission
from dqrng.client import device_submit
from dqrng.enums import Role
from dqrng.exceptions import BalanceNeverAchievedError
from dqrng.exceptions import DQRNGError
from dqrng.exceptions import VerdictFailedError
from dqrng.extractor import extract_blocks
from dqrng.extractor import manifest
from dqrng.extractor import plan_extraction
from dqrng.files import write_bits
from dqrng.files import write_json
from dqrng.helpers import bits_digest
from dqrng.helpers import new_bits
from dqrng.optics import SchemeConfig
from dqrng.optics import Simulator
from dqrng.optics import balance_gate
from dqrng.optics import channel_histogram
from dqrng.optics import post_select
from dqrng.runconfig import BalanceConfig
from dqrng.runconfig import RunConfig
from dqrng.sequences import PairedSequences
from dqrng.sequences import ProbVector
from dqrng.sequences import encode_clicks
from dqrng.sequences import entropy_distance
from dqrng.sequences import mutual_information_estimate
from dqrng.sequences import mutual_information_threshold
from dqrng.types import IndexArray
from dqrng.verifier import VerifierConfig
from dqrng.verifier import VerifierServer

__all__ = ["Acquisition", "RunSummary", "acquire", "run_protocol"]

logger = logging.getLogger(__name__)

SubmitFunction = Callable[[bitarray, Optional[bitarray]], Submission]


@dataclass
class Acquisition:
    """Sequences built from the accepted control intervals."""

    sequences: PairedSequences
    accepted: int = 0
    rejected: int = 0
    histogram: IndexArray = field(
        default_factory=lambda: np.zeros(config.CHANNELS + 1, dtype=np.int64),
    )
    channel_counts: IndexArray = field(
        default_factory=lambda: np.zeros(config.CHANNELS, dtype=np.int64),
    )

    @property
    def intervals(self) -> int:
        return self.accepted + self.rejected


@dataclass
class RunSummary:
    """Machine readable outcome of a protocol run."""

    intervals_accepted: int
    intervals_rejected: int
    raw_bits: int
    entropy_distance: float
    mutual_information: float
    mutual_information_threshold: float
    histogram: Dict[int, int]
    channel_counts: Dict[int, int]
    criteria_id: str
    session_id: Optional[str] = None
    verdict: Optional[str] = None
    qber: Optional[float] = None
    rate: Optional[float] = None
    extracted_bits: Optional[int] = None
    error: Optional[str] = None
    artifacts: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "intervals_accepted": self.intervals_accepted,
            "intervals_rejected": self.intervals_rejected,
            "raw_bits": self.raw_bits,
            "entropy_distance": self.entropy_distance,
            "mutual_information": self.mutual_information,
            "mutual_information_threshold": self.mutual_information_threshold,
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "channel_counts": {str(k): v for k, v in self.channel_counts.items()},
            "criteria_id": self.criteria_id,
            "session_id": self.session_id,
            "verdict": self.verdict,
            "qber": self.qber,
            "rate": self.rate,
            "l_q": self.extracted_bits,
            "error": self.error,
            "artifacts": dict(self.artifacts),
        }


def acquire(
    scheme: SchemeConfig,
    balance: BalanceConfig,
    target_bits: int,
    *,
    audit: bool = True,
) -> Acquisition:
    """
    Measure control intervals until ``target_bits`` measurements are accepted.

    Rejected intervals are discarded entirely.

    Raises
    ------
    BalanceNeverAchievedError
        If the target is not reached within ``balance.max_intervals`` intervals.

    """
    empty = PairedSequences(new_bits(), new_bits(), new_bits() if audit else None)
    acquisition = Acquisition(sequences=empty)
    with Simulator(scheme) as simulator:
        while (
            len(acquisition.sequences) < target_bits
            and acquisition.intervals < balance.max_intervals
        ):
            events, histogram = post_select(simulator.run_for(balance.interval))
            decision = balance_gate(events, balance.bounds)
            if not decision:
                acquisition.rejected += 1
                logger.warning(
                    "Control interval %d rejected: %s",
                    acquisition.intervals,
                    decision.reason,
                )
                continue
            acquisition.accepted += 1
            acquisition.histogram += histogram
            acquisition.channel_counts += channel_histogram(events)
            acquisition.sequences.extend(encode_clicks(events, audit=audit))
            logger.info(
                "Control interval %d accepted, %d of %d bits",
                acquisition.intervals,
                len(acquisition.sequences),
                target_bits,
            )
    if len(acquisition.sequences) < target_bits:
        msg = (
            f"balance never achieved: {acquisition.accepted} of "
            f"{acquisition.intervals} control intervals accepted, "
            f"{len(acquisition.sequences)} of {target_bits} bits"
        )
        raise BalanceNeverAchievedError(msg)
    acquisition.sequences = acquisition.sequences.truncated(target_bits)
    return acquisition


def _loopback_submit(run: RunConfig) -> SubmitFunction:
    settings = run.verifier
    token = settings.token or "loopback"

    def submit(q2: bitarray, audit: Optional[bitarray]) -> Submission:
        verifier = VerifierConfig(
            storage=run.output_dir / settings.storage,
            tokens={Role.device: token, **settings.tokens},
            port=0,
            timeout=settings.timeout,
            criteria=run.criteria,
        )
        with VerifierServer(verifier) as server:
            server.start()
            return device_submit(
                server.address,
                q2,
                run.criteria_id,
                audit,
                token=token,
                timeout=settings.timeout,
                chunk_size=settings.chunk_size,
            )

    return submit


def _remote_submit(run: RunConfig) -> SubmitFunction:
    settings = run.verifier

    def submit(q2: bitarray, audit: Optional[bitarray]) -> Submission:
        return device_submit(
            settings.endpoint,
            q2,
            run.criteria_id,
            audit,
            token=settings.token,
            timeout=settings.timeout,
            chunk_size=settings.chunk_size,
        )

    return submit


def run_protocol(
    run: RunConfig,
    *,
    submit: Optional[SubmitFunction] = None,
) -> RunSummary:
    """
    Run the full protocol loop.

    Raises
    ------
    BalanceNeverAchievedError
        If too few control intervals pass the balance gate.
    TransportError
        If the verifier cannot be reached; nothing is extracted.
    VerdictFailedError
        If the verifier rejects the public sequence; nothing is extracted.
    InsufficientEntropyError
        If no secure bit can be extracted.

    """
    if submit is None:
        submit = _loopback_submit(run) if run.verifier.loopback else _remote_submit(run)
    out = Path(run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    acquisition = acquire(run.scheme, run.balance, run.target_bits, audit=run.audit)
    seqs = acquisition.sequences
    summary = RunSummary(
        intervals_accepted=acquisition.accepted,
        intervals_rejected=acquisition.rejected,
        raw_bits=len(seqs),
        entropy_distance=entropy_distance(
            ProbVector.from_weights(acquisition.channel_counts.tolist()),
        ),
        mutual_information=mutual_information_estimate(seqs),
        mutual_information_threshold=mutual_information_threshold(len(seqs)),
        histogram=dict(enumerate(acquisition.histogram.tolist())),
        channel_counts=dict(enumerate(acquisition.channel_counts.tolist())),
        criteria_id=run.criteria_id,
    )
    summary.artifacts["q1"] = str(write_bits(out / "q1.bits", seqs.q1))
    summary.artifacts["q2"] = str(write_bits(out / "q2.bits", seqs.q2))
    if seqs.audit is not None:
        summary.artifacts["audit"] = str(write_bits(out / "audit.bits", seqs.audit))
    try:
        submission = submit(seqs.q2, seqs.audit)
        summary.session_id = submission.session_id
        summary.verdict = submission.verdict.value
        summary.artifacts["report"] = str(
            write_json(out / "report.json", submission.report.to_dict()),
        )
        if not submission.passed:
            msg = (
                "Verifier rejected the public sequence in session "
                f"{submission.session_id}"
            )
            raise VerdictFailedError(msg)
        plan = plan_extraction(
            len(seqs.q1),
            run.scheme.noise,
            run.extraction.epsilon,
            qber=run.extraction.qber,
            block_size=run.extraction.block_size,
        )
        summary.qber = plan.params.qber
        summary.rate = plan.rate
        summary.extracted_bits = plan.length
        extracted = extract_blocks(
            seqs.q1,
            plan,
            run.extraction.seed,
            workers=run.extraction.workers,
        )
        extracted_path = write_bits(out / "extracted.bits", extracted)
        summary.artifacts["extracted"] = str(extracted_path)
        manifest_path = out / "manifest.json"
        manifest_path.write_text(
            manifest(plan, run.extraction.seed, output_digest=bits_digest(extracted)),
            encoding="utf-8",
        )
        summary.artifacts["manifest"] = str(manifest_path)
    except DQRNGError as error:
        summary.error = f"{type(error).__name__}: {error}"
        raise
    finally:
        write_json(out / "summary.json", summary.to_dict())
    logger.info(
        "Run complete: %d raw bits, Q=%.6f, R=%.6f, %d extracted bits",
        summary.raw_bits,
        summary.qber,
        summary.rate,
        summary.extracted_bits,
    )
    return summary
