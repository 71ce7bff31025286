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
Command line interface.

Every module is exposed as a subcommand; ``dqrng run`` drives the whole protocol
loop.  All subcommands read the shared run configuration given with
``--config``, flags override its values.

Exit codes: 0 success or pass, 1 other errors, 2 verdict fail, 3 balance never
achieved, 4 insufficient entropy, 5 transport or protocol error.  Errors are
reported as one JSON record on stderr.
"""
import json
import logging
from pathlib import Path
from typing import Any
from typing import Dict
from typing import Optional

import click
import numpy as np

from dqrng import config
from dqrng.about import __version__
from dqrng.battery import pvalue_cdf
from dqrng.battery import run_battery
from dqrng.client import audit_retrieve
from dqrng.client import device_submit
from dqrng.client import fetch_verdict
from dqrng.enums import Role
from dqrng.exceptions import DQRNGError
from dqrng.exceptions import VerdictFailedError
from dqrng.extractor import extract_blocks
from dqrng.extractor import manifest
from dqrng.extractor import plan_extraction
from dqrng.files import export_bits
from dqrng.files import read_bits
from dqrng.files import read_events
from dqrng.files import write_bits
from dqrng.files import write_csv
from dqrng.files import write_events
from dqrng.files import write_json
from dqrng.helpers import bits_digest
from dqrng.optics import ClickEvents
from dqrng.optics import balance_gate
from dqrng.optics import channel_histogram
from dqrng.optics import control_intervals
from dqrng.optics import post_select
from dqrng.optics import simulate as simulate_pulses
from dqrng.optics import stability_trace
from dqrng.pipeline import run_protocol
from dqrng.registry import registry
from dqrng.runconfig import RunConfig
from dqrng.runconfig import load_run_config
from dqrng.sequences import ProbVector
from dqrng.sequences import encode_clicks
from dqrng.sequences import entropy_distance
from dqrng.sequences import entropy_surface
from dqrng.sequences import max_entropy_distance
from dqrng.sequences import mutual_information_estimate
from dqrng.sequences import mutual_information_threshold
from dqrng.sequences import reconstruct_private
from dqrng.verifier import VerifierConfig
from dqrng.verifier import judge
from dqrng.verifier import serve as serve_verifier

__all__ = ["cli", "main"]

logger = logging.getLogger(__name__)

FilePath = click.Path(dir_okay=False, path_type=Path)
ExistingFile = click.Path(exists=True, dir_okay=False, path_type=Path)
StorageDir = click.Path(file_okay=False, path_type=Path)


def error_record(error: DQRNGError) -> str:
    """Return the JSON error record printed on stderr."""
    return json.dumps(
        {
            "error": type(error).__name__,
            "message": str(error),
            "exit_code": error.exit_code,
        },
        sort_keys=True,
    )


class DQRNGGroup(click.Group):
    """Command group that maps package errors onto exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except DQRNGError as error:
            logger.debug("Command failed", exc_info=True)
            click.echo(error_record(error), err=True)
            ctx.exit(error.exit_code)


def _echo_json(document: Any) -> None:
    click.echo(json.dumps(document, indent=2, sort_keys=True))


def _run_config(ctx: click.Context, **overrides: Any) -> RunConfig:
    return load_run_config(ctx.obj["config"], overrides)


@click.group(cls=DQRNGGroup)
@click.version_option(__version__, prog_name="dqrng")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.option(
    "--config",
    "config_path",
    type=ExistingFile,
    default=None,
    help="Run configuration file (JSON).",
)
@click.pass_context
def cli(ctx: click.Context, verbose: int, config_path: Optional[Path]) -> None:
    """Delegated verification of a linear-optics quantum random number generator."""
    config.configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config"] = config_path


@cli.command()
@click.option("--pulses", type=click.IntRange(min=1), required=True)
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--mu", type=float, default=None, help="Mean photon number.")
@click.option("--scheme", type=click.Choice(["spatial", "temporal"]), default=None)
@click.option("--out", type=FilePath, required=True, help="Event file to write.")
@click.pass_context
def simulate(
    ctx: click.Context,
    pulses: int,
    seed: Optional[int],
    mu: Optional[float],
    scheme: Optional[str],
    out: Path,
) -> None:
    """Simulate pulses and write the detection records."""
    run = _run_config(
        ctx,
        **{"scheme.seed": seed, "scheme.noise.mu": mu, "scheme.scheme": scheme},
    )
    batches = list(simulate_pulses(run.scheme, pulses))
    write_events(out, batches, run.scheme.scheme)
    _, histogram = post_select(batches)
    _echo_json({"pulses": pulses, "histogram": histogram.tolist(), "events": str(out)})


def _gated_events(events: ClickEvents, run: RunConfig) -> ClickEvents:
    accepted = []
    for number, interval in enumerate(control_intervals(events, run.balance.interval)):
        decision = balance_gate(interval, run.balance.bounds)
        if decision:
            accepted.append(interval)
        else:
            logger.warning("Control interval %d rejected: %s", number, decision.reason)
    return ClickEvents.concatenate(accepted)


@cli.command()
@click.argument("events_file", type=ExistingFile)
@click.option("--q1", "q1_path", type=FilePath, required=True)
@click.option("--q2", "q2_path", type=FilePath, required=True)
@click.option("--audit", "audit_path", type=FilePath, default=None)
@click.option("--gate/--no-gate", default=True, help="Apply the balance gate.")
@click.pass_context
def encode(
    ctx: click.Context,
    events_file: Path,
    q1_path: Path,
    q2_path: Path,
    audit_path: Optional[Path],
    gate: bool,
) -> None:
    """Post-select single clicks and write the paired sequences."""
    run = _run_config(ctx)
    batch, _ = read_events(events_file)
    events, _ = post_select([batch])
    if gate:
        events = _gated_events(events, run)
    seqs = encode_clicks(events, audit=audit_path is not None)
    write_bits(q1_path, seqs.q1)
    write_bits(q2_path, seqs.q2)
    if audit_path is not None and seqs.audit is not None:
        write_bits(audit_path, seqs.audit)
    _echo_json({"measurements": len(seqs)})


@cli.command()
@click.argument("events_file", type=ExistingFile)
@click.option("--interval", type=float, default=3e-3, show_default=True)
@click.option("--group", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--stability-csv", type=FilePath, default=None)
@click.option("--surface-csv", type=FilePath, default=None)
@click.option("--marginal-lo", type=float, default=0.4, show_default=True)
@click.option("--marginal-hi", type=float, default=0.6, show_default=True)
def diagnose(
    events_file: Path,
    interval: float,
    group: int,
    stability_csv: Optional[Path],
    surface_csv: Optional[Path],
    marginal_lo: float,
    marginal_hi: float,
) -> None:
    """Report entropy, mutual information and stability diagnostics."""
    batch, _ = read_events(events_file)
    events, histogram = post_select([batch])
    counts = channel_histogram(events)
    seqs = encode_clicks(events)
    duration = batch.end / batch.pulse_rate
    trace = stability_trace(events, interval, group, duration=duration)
    document: Dict[str, Any] = {
        "histogram": histogram.tolist(),
        "channel_counts": counts.tolist(),
        "stability_max_deviation": (
            float(np.max(np.abs(trace - 1.0))) if trace.size else None
        ),
        "max_entropy_distance": max_entropy_distance(marginal_lo, marginal_hi),
    }
    if len(events):
        document["entropy_distance"] = entropy_distance(
            ProbVector.from_weights(counts.tolist()),
        )
        document["mutual_information"] = mutual_information_estimate(seqs)
        document["mutual_information_threshold"] = mutual_information_threshold(
            len(seqs),
        )
    if stability_csv is not None:
        write_csv(
            stability_csv,
            ["point", "normalised_count"],
            enumerate(trace.tolist()),
        )
    if surface_csv is not None:
        grid, surface = entropy_surface(marginal_lo, marginal_hi)
        rows = (
            (grid[i], grid[j], surface[i, j])
            for i in range(grid.size)
            for j in range(grid.size)
        )
        write_csv(surface_csv, ["q1_one", "q2_one", "entropy_distance"], rows)
    _echo_json(document)


@cli.command("test")
@click.argument("bits_file", type=ExistingFile)
@click.option("--criteria", "criteria_id", default=None, help="Criteria id.")
@click.option("--report", "report_path", type=FilePath, default=None)
@click.option("--cdf-csv", type=FilePath, default=None)
@click.option("--workers", type=click.IntRange(min=1), default=1)
@click.pass_context
def test_bits(
    ctx: click.Context,
    bits_file: Path,
    criteria_id: Optional[str],
    report_path: Optional[Path],
    cdf_csv: Optional[Path],
    workers: int,
) -> None:
    """Run the statistical battery on a bit file."""
    run = _run_config(ctx, criteria_id=criteria_id)
    criteria_registry = registry.copy()
    for criteria in run.criteria:
        criteria_registry.register(criteria)
    criteria = criteria_registry.get(run.criteria_id)
    report = run_battery(read_bits(bits_file), criteria, workers=workers)
    if report_path is not None:
        write_json(report_path, report.to_dict())
    if cdf_csv is not None:
        ordered, empirical, ideal = pvalue_cdf(report.p_values)
        write_csv(
            cdf_csv,
            ["p_value", "empirical_cdf", "uniform_cdf"],
            zip(ordered.tolist(), empirical.tolist(), ideal.tolist()),
        )
    verdict = judge(report, criteria)
    _echo_json({"verdict": verdict.value, "report": report.to_dict()})
    if not report.passed(require_uniformity=criteria.require_uniformity):
        msg = f"{bits_file} failed criteria {criteria.criteria_id}"
        raise VerdictFailedError(msg)


@cli.command()
@click.argument("bits_file", type=ExistingFile)
@click.option("--out", type=FilePath, required=True, help="Extracted bit file.")
@click.option("--manifest", "manifest_path", type=FilePath, default=None)
@click.option("--qber", type=float, default=None, help="Override the model QBER.")
@click.option("--epsilon", type=float, default=None)
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--block-size", type=click.IntRange(min=1), default=None)
@click.pass_context
def extract(
    ctx: click.Context,
    bits_file: Path,
    out: Path,
    manifest_path: Optional[Path],
    qber: Optional[float],
    epsilon: Optional[float],
    seed: Optional[int],
    block_size: Optional[int],
) -> None:
    """Compress a raw bit file to its extractable length."""
    run = _run_config(
        ctx,
        **{
            "extraction.qber": qber,
            "extraction.epsilon": epsilon,
            "extraction.seed": seed,
            "extraction.block_size": block_size,
        },
    )
    bits = read_bits(bits_file)
    plan = plan_extraction(
        len(bits),
        run.scheme.noise,
        run.extraction.epsilon,
        qber=run.extraction.qber,
        block_size=run.extraction.block_size,
    )
    output = extract_blocks(
        bits,
        plan,
        run.extraction.seed,
        workers=run.extraction.workers,
    )
    write_bits(out, output)
    document = manifest(plan, run.extraction.seed, output_digest=bits_digest(output))
    if manifest_path is None:
        manifest_path = out.with_name(out.name + ".manifest.json")
    manifest_path.write_text(document, encoding="utf-8")
    _echo_json({"l_q": plan.length, "rate": plan.rate, "qber": plan.params.qber})


@cli.command()
@click.option("--host", default=None)
@click.option("--port", type=click.IntRange(0, 65535), default=None)
@click.option("--storage", type=StorageDir, default=None)
@click.option("--device-token", default=None)
@click.option("--auditor-token", default=None)
@click.option("--reader-token", default=None)
@click.option("--max-sessions", type=click.IntRange(min=1), default=None)
@click.pass_context
def serve(
    ctx: click.Context,
    host: Optional[str],
    port: Optional[int],
    storage: Optional[Path],
    device_token: Optional[str],
    auditor_token: Optional[str],
    reader_token: Optional[str],
    max_sessions: Optional[int],
) -> None:
    """Run the verifier service."""
    run = _run_config(
        ctx,
        **{
            "verifier.host": host,
            "verifier.port": port,
            "verifier.storage": None if storage is None else str(storage),
            "verifier.max_sessions": max_sessions,
        },
    )
    tokens = dict(run.verifier.tokens)
    for role, token in (
        (Role.device, device_token),
        (Role.auditor, auditor_token),
        (Role.reader, reader_token),
    ):
        if token is not None:
            tokens[role] = token
    if not tokens:
        raise click.UsageError("At least one role token is required")
    serve_verifier(
        VerifierConfig(
            storage=run.verifier.storage,
            tokens=tokens,
            host=run.verifier.host,
            port=run.verifier.port,
            max_sessions=run.verifier.max_sessions,
            timeout=run.verifier.timeout,
            criteria=run.criteria,
        ),
    )


def _endpoint(run: RunConfig, endpoint: Optional[str]) -> Any:
    return endpoint if endpoint is not None else run.verifier.endpoint


@cli.command()
@click.argument("q2_file", type=ExistingFile)
@click.option("--audit", "audit_file", type=ExistingFile, default=None)
@click.option("--endpoint", default=None, help="Verifier as host:port.")
@click.option("--token", default=None)
@click.option("--criteria", "criteria_id", default=None)
@click.pass_context
def submit(
    ctx: click.Context,
    q2_file: Path,
    audit_file: Optional[Path],
    endpoint: Optional[str],
    token: Optional[str],
    criteria_id: Optional[str],
) -> None:
    """Submit a public sequence to the verifier."""
    run = _run_config(ctx, **{"verifier.token": token, "criteria_id": criteria_id})
    submission = device_submit(
        _endpoint(run, endpoint),
        read_bits(q2_file),
        run.criteria_id,
        None if audit_file is None else read_bits(audit_file),
        token=run.verifier.token,
        timeout=run.verifier.timeout,
        chunk_size=run.verifier.chunk_size,
    )
    _echo_json(
        {
            "session_id": submission.session_id,
            "verdict": submission.verdict.value,
            "report": submission.report.to_dict(),
        },
    )
    if not submission.passed:
        msg = f"Verifier rejected session {submission.session_id}"
        raise VerdictFailedError(msg)


@cli.command()
@click.argument("session_id")
@click.option("--endpoint", default=None, help="Verifier as host:port.")
@click.option("--token", required=True, help="Auditor token.")
@click.option("--out", type=FilePath, required=True, help="Audit bit file to write.")
@click.option("--q2", "q2_file", type=ExistingFile, default=None)
@click.option("--q1-out", type=FilePath, default=None)
@click.pass_context
def audit(
    ctx: click.Context,
    session_id: str,
    endpoint: Optional[str],
    token: str,
    out: Path,
    q2_file: Optional[Path],
    q1_out: Optional[Path],
) -> None:
    """Retrieve an audit stream, optionally reconstructing the private sequence."""
    run = _run_config(ctx)
    record = audit_retrieve(
        _endpoint(run, endpoint),
        session_id,
        token=token,
        timeout=run.verifier.timeout,
    )
    write_bits(out, record.bits)
    if q2_file is not None and q1_out is not None:
        write_bits(q1_out, reconstruct_private(record.bits, read_bits(q2_file)))
    _echo_json(
        {
            "session_id": session_id,
            "bits": len(record.bits),
            "retained_at": record.retained_at.isoformat(),
        },
    )


@cli.command()
@click.argument("session_id")
@click.option("--endpoint", default=None, help="Verifier as host:port.")
@click.option("--token", required=True, help="Role token.")
@click.option(
    "--role",
    type=click.Choice([role.value for role in Role]),
    default=Role.reader.value,
    show_default=True,
)
@click.pass_context
def verdict(
    ctx: click.Context,
    session_id: str,
    endpoint: Optional[str],
    token: str,
    role: str,
) -> None:
    """Fetch the stored verdict of a session."""
    run = _run_config(ctx)
    submission = fetch_verdict(
        _endpoint(run, endpoint),
        session_id,
        token=token,
        role=Role(role),
        timeout=run.verifier.timeout,
    )
    _echo_json(
        {
            "session_id": submission.session_id,
            "criteria_id": submission.criteria_id,
            "verdict": submission.verdict.value,
            "report": submission.report.to_dict(),
        },
    )


@cli.command()
@click.argument("bits_file", type=ExistingFile)
@click.argument("out", type=click.Path(dir_okay=False, allow_dash=True), default="-")
def export(bits_file: Path, out: str) -> None:
    """Export raw bytes for external test suites, ``-`` writes to stdout."""
    if out != "-":
        export_bits(bits_file, out)
        return
    bits = read_bits(bits_file)
    if not bits:
        logger.warning("Bit file %s is empty, exporting nothing", bits_file)
    click.get_binary_stream("stdout").write(bits.tobytes())


@cli.command()
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--extraction-seed", type=click.IntRange(min=0), default=None)
@click.option("--target-bits", type=click.IntRange(min=1), default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@click.option("--loopback/--remote", default=None, help="Run the verifier in-process.")
@click.pass_context
def run(
    ctx: click.Context,
    seed: Optional[int],
    extraction_seed: Optional[int],
    target_bits: Optional[int],
    out_dir: Optional[str],
    loopback: Optional[bool],
) -> None:
    """Run the complete protocol loop."""
    settings = _run_config(
        ctx,
        **{
            "scheme.seed": seed,
            "extraction.seed": extraction_seed,
            "target_bits": target_bits,
            "output_dir": out_dir,
            "verifier.loopback": loopback,
        },
    )
    summary = run_protocol(settings)
    _echo_json(summary.to_dict())


def main() -> None:
    """Entry point of the ``dqrng`` command."""
    cli(prog_name="dqrng")

