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
Monte-Carlo simulation of the multiplexed single photon source.

A pulsed laser in the weak coherent regime emits a Poisson distributed number of
photons per pulse.  Each photon picks one of four paths with the (possibly
drifting) channel probabilities and is detected with the detector efficiency.
Detectors add dark counts.  Two read-out schemes are modelled:

- spatial: four independent detectors, one per path,
- temporal: one detector behind four delay lines, paths arrive in four time bins
  separated by ``bin_spacing``; a click is lost when it follows the previous
  click of the detector by less than the dead time.

The simulation is vectorised with numpy over chunks of pulses.  Every chunk has
its own random stream derived from the configured seed and the chunk index, so
the output is bit identical whether chunks are simulated one after another or
concurrently.
"""
import logging
import math
from collections import deque
from concurrent.futures import Future
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from typing import Deque
from typing import Iterable
from typing import Iterator
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
import numpy.typing as npt
from typing_extensions import Self

from dqrng import config
from dqrng.enums import DriftMode
from dqrng.enums import Scheme
from dqrng.exceptions import InsufficientDataError
from dqrng.exceptions import ParameterDomainError
from dqrng.photon_stats import NoiseModel
from dqrng.sequences import ProbVector
from dqrng.types import FloatArray
from dqrng.types import IndexArray

__all__ = [
    "BalanceDecision",
    "ClickEvent",
    "ClickEvents",
    "DetectionBatch",
    "DetectionRecord",
    "DriftConfig",
    "SchemeConfig",
    "Simulator",
    "balance_gate",
    "channel_histogram",
    "control_intervals",
    "estimate_qber",
    "post_select",
    "simulate",
    "stability_trace",
]

logger = logging.getLogger(__name__)

MaskArray = npt.NDArray[np.uint8]

# number of set bits and lowest set bit of a 4 bit click mask
POPCOUNT = np.array([bin(mask).count("1") for mask in range(16)], dtype=np.int64)
LOWEST_BIT = np.array(
    [(mask & -mask).bit_length() - 1 if mask else 0 for mask in range(16)],
    dtype=np.int64,
)
DRIFT_STREAM = 0
CHUNK_STREAM = 1


@dataclass(frozen=True)
class DriftConfig:
    """
    Slow drift of the channel probabilities.

    Attributes
    ----------
    mode : DriftMode
        ``none``, an Ornstein-Uhlenbeck walk (``ou_walk``) or a ``sinusoid``.
    correlation_time : float
        Correlation time of the walk, or period of the sinusoid, in seconds.
    amplitude : float
        Maximum relative deviation of each channel weight, below one half.
    step : float
        Time resolution of the drift process in seconds.

    """

    mode: DriftMode = DriftMode.none
    correlation_time: float = config.DRIFT_CORRELATION_TIME
    amplitude: float = config.DRIFT_AMPLITUDE
    step: float = config.DRIFT_STEP

    def __post_init__(self) -> None:
        """Check the parameter domains."""
        if not 0.0 <= self.amplitude < 0.5:  # noqa: PLR2004
            msg = f"Drift amplitude must be in [0, 0.5), got {self.amplitude}"
            raise ParameterDomainError(msg)
        if self.correlation_time <= 0 or self.step <= 0:
            msg = "Drift correlation time and step must be positive"
            raise ParameterDomainError(msg)


@dataclass(frozen=True)
class SchemeConfig:
    """
    Parameters of one simulated source.

    ``channel_efficiency`` scales the detection efficiency of each channel, the
    knob the polarisation controllers of the spatial setup turn.
    """

    scheme: Scheme = Scheme.spatial
    pulse_rate: float = config.PULSE_RATE
    channel_probs: ProbVector = field(default_factory=ProbVector.uniform)
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(mu=0.1))
    dead_time: float = config.DEAD_TIME
    bin_spacing: float = config.BIN_SPACING
    drift: DriftConfig = field(default_factory=DriftConfig)
    seed: int = 0
    channel_efficiency: Tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)
    workers: int = 1

    def __post_init__(self) -> None:
        """Check the scheme geometry."""
        if self.pulse_rate <= 0:
            msg = f"Pulse rate must be positive, got {self.pulse_rate}"
            raise ParameterDomainError(msg)
        if self.noise.channels != config.CHANNELS:
            msg = f"The optics have 4 channels, got {self.noise.channels}"
            raise ParameterDomainError(msg)
        if len(self.channel_efficiency) != config.CHANNELS or not all(
            0.0 <= e <= 1.0 for e in self.channel_efficiency
        ):
            msg = (
                "Four channel efficiencies in [0, 1] required, "
                f"got {self.channel_efficiency}"
            )
            raise ParameterDomainError(msg)
        if not 0 <= self.seed < 2**64:
            msg = f"Seed must be an unsigned 64 bit integer, got {self.seed}"
            raise ParameterDomainError(msg)
        if self.workers < 1:
            msg = f"At least one worker is required, got {self.workers}"
            raise ParameterDomainError(msg)
        if self.scheme == Scheme.temporal:
            if self.bin_spacing <= self.dead_time:
                msg = (
                    f"Bin spacing {self.bin_spacing} s must exceed the dead time "
                    f"{self.dead_time} s"
                )
                raise ParameterDomainError(msg)
            if config.CHANNELS * self.bin_spacing >= 1.0 / self.pulse_rate:
                msg = (
                    f"{config.CHANNELS} bins of {self.bin_spacing} s do not fit in "
                    f"the pulse period {1.0 / self.pulse_rate} s"
                )
                raise ParameterDomainError(msg)

    @property
    def bin_offset(self) -> float:
        """Arrival delay between consecutive channels, zero for the spatial scheme."""
        return self.bin_spacing if self.scheme == Scheme.temporal else 0.0

    def with_seed(self, seed: int) -> "SchemeConfig":
        """Return a copy with another seed."""
        return replace(self, seed=seed)


@dataclass(frozen=True)
class DetectionRecord:
    """Outcome of one pulse."""

    pulse_index: int
    clicked: Tuple[bool, bool, bool, bool]
    timestamp: float

    @property
    def mask(self) -> int:
        """Return the click mask, bit ``c`` set when channel ``c`` clicked."""
        return sum(1 << c for c, hit in enumerate(self.clicked) if hit)


@dataclass(frozen=True)
class ClickEvent:
    """A post-selected single click."""

    pulse_index: int
    channel: int


@dataclass(frozen=True)
class DetectionBatch:
    """
    Outcomes of the consecutive pulses ``start .. start + pulse_count - 1``.

    Only pulses with at least one click are listed, all other pulses of the range
    stayed dark.  ``photons`` holds the emitted photon number of the listed pulses
    when the batch comes from the simulator.
    """

    start: int
    pulse_count: int
    pulse_index: IndexArray
    masks: MaskArray
    pulse_rate: float
    bin_offset: float = 0.0
    photons: Optional[npt.NDArray[np.uint16]] = None

    def __len__(self) -> int:
        """Return the number of pulses covered."""
        return self.pulse_count

    def __iter__(self) -> Iterator[DetectionRecord]:
        """Iterate over the records of the pulses that clicked."""
        return self.records()

    def records(self, *, include_dark: bool = False) -> Iterator[DetectionRecord]:
        """Yield a DetectionRecord per pulse, optionally including dark pulses."""
        masks = dict(zip(self.pulse_index.tolist(), self.masks.tolist()))
        indices: Iterable[int] = (
            range(self.start, self.start + self.pulse_count)
            if include_dark
            else self.pulse_index.tolist()
        )
        for index in indices:
            mask = masks.get(index, 0)
            yield DetectionRecord(
                pulse_index=index,
                clicked=(
                    bool(mask & 1),
                    bool(mask & 2),
                    bool(mask & 4),
                    bool(mask & 8),
                ),
                timestamp=index / self.pulse_rate + LOWEST_BIT[mask] * self.bin_offset,
            )

    @property
    def end(self) -> int:
        """Index of the first pulse after the batch."""
        return self.start + self.pulse_count

    def timestamps(self) -> FloatArray:
        """Return the time of the first click of every listed pulse."""
        offsets = LOWEST_BIT[self.masks] * self.bin_offset
        return np.asarray(self.pulse_index / self.pulse_rate + offsets)

    def split(self, pulses: int) -> Tuple["DetectionBatch", "DetectionBatch"]:
        """Split after the first ``pulses`` pulses."""
        pulses = min(max(pulses, 0), self.pulse_count)
        cut = int(np.searchsorted(self.pulse_index, self.start + pulses))
        photons = self.photons
        head = DetectionBatch(
            start=self.start,
            pulse_count=pulses,
            pulse_index=self.pulse_index[:cut],
            masks=self.masks[:cut],
            pulse_rate=self.pulse_rate,
            bin_offset=self.bin_offset,
            photons=None if photons is None else photons[:cut],
        )
        tail = DetectionBatch(
            start=self.start + pulses,
            pulse_count=self.pulse_count - pulses,
            pulse_index=self.pulse_index[cut:],
            masks=self.masks[cut:],
            pulse_rate=self.pulse_rate,
            bin_offset=self.bin_offset,
            photons=None if photons is None else photons[cut:],
        )
        return head, tail

    @classmethod
    def from_records(
        cls,
        records: Sequence[DetectionRecord],
        *,
        pulse_rate: float = config.PULSE_RATE,
        bin_offset: float = 0.0,
        start: Optional[int] = None,
        pulse_count: Optional[int] = None,
    ) -> "DetectionBatch":
        """Build a batch from individual records, dark records are dropped."""
        ordered = sorted(records, key=lambda record: record.pulse_index)
        first = ordered[0].pulse_index if ordered else 0
        start = first if start is None else start
        last = ordered[-1].pulse_index + 1 if ordered else start
        lit = [record for record in ordered if any(record.clicked)]
        return cls(
            start=start,
            pulse_count=last - start if pulse_count is None else pulse_count,
            pulse_index=np.array([r.pulse_index for r in lit], dtype=np.int64),
            masks=np.array([r.mask for r in lit], dtype=np.uint8),
            pulse_rate=pulse_rate,
            bin_offset=bin_offset,
        )


@dataclass(frozen=True)
class ClickEvents:
    """Post-selected single clicks in pulse order, stored column-wise."""

    pulse_index: IndexArray
    channels: npt.NDArray[np.uint8]
    timestamps: FloatArray

    def __len__(self) -> int:
        """Return the number of events."""
        return int(self.pulse_index.size)

    def __iter__(self) -> Iterator[ClickEvent]:
        """Iterate over the events."""
        for index, channel in zip(self.pulse_index.tolist(), self.channels.tolist()):
            yield ClickEvent(pulse_index=index, channel=channel)

    def __getitem__(self, key: slice) -> "ClickEvents":
        """Return a slice of the events."""
        return ClickEvents(
            pulse_index=self.pulse_index[key],
            channels=self.channels[key],
            timestamps=self.timestamps[key],
        )

    @classmethod
    def empty(cls) -> "ClickEvents":
        """Return an empty event stream."""
        return cls(
            pulse_index=np.zeros(0, dtype=np.int64),
            channels=np.zeros(0, dtype=np.uint8),
            timestamps=np.zeros(0, dtype=np.float64),
        )

    @classmethod
    def concatenate(cls, parts: Iterable["ClickEvents"]) -> "ClickEvents":
        """Join event streams in order."""
        chunks = [part for part in parts if len(part)]
        if not chunks:
            return cls.empty()
        return cls(
            pulse_index=np.concatenate([c.pulse_index for c in chunks]),
            channels=np.concatenate([c.channels for c in chunks]),
            timestamps=np.concatenate([c.timestamps for c in chunks]),
        )

    @classmethod
    def from_channels(
        cls,
        channels: Iterable[int],
        *,
        pulse_rate: float = config.PULSE_RATE,
    ) -> "ClickEvents":
        """Create one event per pulse from a list of channels."""
        values = np.asarray(list(channels), dtype=np.uint8)
        index = np.arange(values.size, dtype=np.int64)
        return cls(pulse_index=index, channels=values, timestamps=index / pulse_rate)


@dataclass(frozen=True)
class BalanceDecision:
    """Outcome of the balance gate for one control interval."""

    accepted: bool
    frequencies: Tuple[float, ...]
    count: int
    reason: str = ""

    def __bool__(self) -> bool:
        """Return True when the interval was accepted."""
        return self.accepted


class _DriftProcess:
    """Channel probabilities on the drift time grid, generated strictly in order."""

    def __init__(self, scheme: SchemeConfig) -> None:
        self.base = scheme.channel_probs.as_array()
        self.drift = scheme.drift
        self._rng = np.random.default_rng(
            np.random.SeedSequence(scheme.seed, spawn_key=(DRIFT_STREAM,)),
        )
        self._state = self._rng.standard_normal(config.CHANNELS)
        self._first = 0
        self._next = 0
        self._values: Deque[FloatArray] = deque()

    @property
    def constant(self) -> bool:
        return self.drift.mode == DriftMode.none or self.drift.amplitude == 0

    def _deviation(self, step: int) -> FloatArray:
        if self.drift.mode == DriftMode.sinusoid:
            phase = 2 * math.pi * step * self.drift.step / self.drift.correlation_time
            shifts = np.arange(config.CHANNELS) * math.pi / 2
            return np.asarray(self.drift.amplitude * np.sin(phase + shifts))
        decay = math.exp(-self.drift.step / self.drift.correlation_time)
        if step > 0:
            noise = self._rng.standard_normal(config.CHANNELS)
            self._state = decay * self._state + math.sqrt(1 - decay**2) * noise
        # tanh keeps the deviation strictly inside the amplitude
        return np.asarray(self.drift.amplitude * np.tanh(self._state))

    def _probabilities(self, step: int) -> FloatArray:
        weights = self.base * (1.0 + self._deviation(step))
        return np.asarray(weights / weights.sum())

    def grid(self, first_step: int, last_step: int) -> FloatArray:
        """Return the probabilities of steps ``first_step .. last_step``."""
        while self._next <= last_step:
            self._values.append(self._probabilities(self._next))
            self._next += 1
        while self._first < first_step:
            self._values.popleft()
            self._first += 1
        return np.array(list(self._values)[: last_step - first_step + 1])


def _apply_dead_time(
    clicks: npt.NDArray[np.bool_],
    bin_spacing: float,
    dead_time: float,
) -> int:
    """
    Drop clicks of the single temporal detector that fall into its dead time.

    Bins are visited in arrival order; a bin is blind when the previous
    registered click of the same pulse is less than ``dead_time`` earlier.  The
    gap to the previous pulse is at least ``period - 3 * bin_spacing``, which the
    validated geometry keeps above the dead time.  Returns the number of clicks
    removed.
    """
    last = np.full(clicks.shape[0], -np.inf)
    removed = 0
    for channel in range(clicks.shape[1]):
        arrival = channel * bin_spacing
        blind = clicks[:, channel] & (arrival - last < dead_time)
        removed += int(blind.sum())
        clicks[:, channel] &= ~blind
        last = np.where(clicks[:, channel], arrival, last)
    return removed


def _simulate_chunk(
    scheme: SchemeConfig,
    index: int,
    chunk_size: int,
    drift: Optional[Tuple[int, FloatArray]],
) -> DetectionBatch:
    rng = np.random.default_rng(
        np.random.SeedSequence(scheme.seed, spawn_key=(CHUNK_STREAM, index)),
    )
    start = index * chunk_size
    noise = scheme.noise
    photons = rng.poisson(noise.mu, chunk_size)
    lit = np.flatnonzero(photons)
    # one row per photon: the pulse it belongs to and the path it takes
    owner = np.repeat(lit, photons[lit])
    if drift is None:
        cdf = np.cumsum(scheme.channel_probs.as_array())[None, :]
    else:
        first_step, grid = drift
        steps_per_pulse = 1.0 / (scheme.pulse_rate * scheme.drift.step)
        step = np.floor((start + owner) * steps_per_pulse).astype(np.int64)
        cdf = np.cumsum(grid[step - first_step], axis=1)
    paths = (rng.random(owner.size)[:, None] >= cdf[:, : config.CHANNELS - 1]).sum(
        axis=1,
    )
    efficiency = noise.eta * np.asarray(scheme.channel_efficiency)
    detected = rng.random(owner.size) < efficiency[paths]
    clicks = np.zeros((chunk_size, config.CHANNELS), dtype=np.bool_)
    clicks[owner[detected], paths[detected]] = True
    if noise.dark_prob > 0:
        clicks |= rng.random((chunk_size, config.CHANNELS)) < noise.dark_prob
    if scheme.scheme == Scheme.temporal:
        removed = _apply_dead_time(clicks, scheme.bin_spacing, scheme.dead_time)
        if removed:
            logger.debug("Chunk %d: %d clicks lost to dead time", index, removed)
    masks = (clicks * (1 << np.arange(config.CHANNELS))).sum(axis=1).astype(np.uint8)
    clicked = np.flatnonzero(masks)
    return DetectionBatch(
        start=start,
        pulse_count=chunk_size,
        pulse_index=(start + clicked).astype(np.int64),
        masks=masks[clicked],
        pulse_rate=scheme.pulse_rate,
        bin_offset=scheme.bin_offset,
        photons=np.minimum(photons[clicked], np.iinfo(np.uint16).max).astype(np.uint16),
    )


class Simulator:
    """
    Stateful simulator that hands out consecutive pulses.

    Successive calls of `run` continue where the previous one stopped, and the
    concatenated output equals a single call with the summed pulse count.
    With ``workers > 1`` chunks are simulated concurrently in a thread pool and
    delivered in order.
    """

    def __init__(
        self,
        scheme: SchemeConfig,
        *,
        chunk_size: int = config.SIMULATION_CHUNK,
    ) -> None:
        """Initialize the simulator at pulse zero."""
        if chunk_size < 1:
            msg = f"Chunk size must be positive, got {chunk_size}"
            raise ParameterDomainError(msg)
        self.scheme = scheme
        self.chunk_size = chunk_size
        self._drift = _DriftProcess(scheme)
        self._next_chunk = 0
        self._pending: Deque["Future[DetectionBatch]"] = deque()
        self._leftover: Optional[DetectionBatch] = None
        self._pool: Optional[ThreadPoolExecutor] = (
            ThreadPoolExecutor(max_workers=scheme.workers)
            if scheme.workers > 1
            else None
        )
        self.position = 0

    def __repr__(self) -> str:
        """Create a string (c)representation for Simulator."""
        return (
            f"{self.__class__.__module__}.{self.__class__.__name__}("
            f"scheme={self.scheme!r}, "
            f"chunk_size={self.chunk_size!r}, "
            ")"
        )

    def __enter__(self) -> Self:
        """Enter the context."""
        return self

    def __exit__(self, *args: object) -> None:
        """Shut the worker pool down."""
        self.close()

    def close(self) -> None:
        """Shut the worker pool down."""
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _drift_grid(self, index: int) -> Optional[Tuple[int, FloatArray]]:
        if self._drift.constant:
            return None
        steps_per_pulse = 1.0 / (self.scheme.pulse_rate * self.scheme.drift.step)
        start = index * self.chunk_size
        first = math.floor(start * steps_per_pulse)
        last = math.floor((start + self.chunk_size - 1) * steps_per_pulse)
        return first, self._drift.grid(first, last)

    def _submit(self) -> "Future[DetectionBatch]":
        index = self._next_chunk
        self._next_chunk += 1
        drift = self._drift_grid(index)
        if self._pool is None:
            future: "Future[DetectionBatch]" = Future()
            future.set_result(
                _simulate_chunk(self.scheme, index, self.chunk_size, drift),
            )
            return future
        return self._pool.submit(
            _simulate_chunk,
            self.scheme,
            index,
            self.chunk_size,
            drift,
        )

    def _next_batch(self) -> DetectionBatch:
        if self._leftover is not None and self._leftover.pulse_count:
            batch, self._leftover = self._leftover, None
            return batch
        depth = self.scheme.workers if self._pool is not None else 1
        while len(self._pending) < depth:
            self._pending.append(self._submit())
        return self._pending.popleft().result()

    def run(self, n_pulses: int) -> Iterator[DetectionBatch]:
        """Yield batches that together cover the next ``n_pulses`` pulses."""
        if n_pulses < 0:
            msg = f"Number of pulses must be >= 0, got {n_pulses}"
            raise ParameterDomainError(msg)
        remaining = n_pulses
        while remaining > 0:
            batch = self._next_batch()
            head, tail = batch.split(remaining)
            if tail.pulse_count:
                self._leftover = tail
            remaining -= head.pulse_count
            self.position += head.pulse_count
            yield head

    def run_for(self, seconds: float) -> Iterator[DetectionBatch]:
        """Yield the pulses emitted during the next ``seconds``."""
        return self.run(round(seconds * self.scheme.pulse_rate))


def simulate(
    scheme: SchemeConfig,
    n_pulses: int,
    *,
    chunk_size: int = config.SIMULATION_CHUNK,
) -> Iterator[DetectionBatch]:
    """
    Simulate ``n_pulses`` pulses of the configured source.

    The stream is deterministic given the configuration, its seed included.
    """
    with Simulator(scheme, chunk_size=chunk_size) as simulator:
        yield from simulator.run(n_pulses)


def post_select(
    batches: Iterable[Union[DetectionBatch, DetectionRecord]],
) -> Tuple[ClickEvents, IndexArray]:
    """
    Keep the pulses with exactly one click.

    Returns the single click events in pulse order and the histogram of pulses
    by number of clicked channels ``k = 0 .. 4``.  Individual records are
    accepted as well as batches.
    """
    histogram = np.zeros(config.CHANNELS + 1, dtype=np.int64)
    parts: List[ClickEvents] = []
    loose: List[DetectionRecord] = []

    def flush() -> None:
        if loose:
            batch = DetectionBatch.from_records(loose)
            parts.append(_select_batch(batch, histogram, loose))
            loose.clear()

    for item in batches:
        if isinstance(item, DetectionRecord):
            loose.append(item)
            continue
        flush()
        parts.append(_select_batch(item, histogram))
    flush()
    return ClickEvents.concatenate(parts), histogram


def _select_batch(
    batch: DetectionBatch,
    histogram: IndexArray,
    records: Optional[Sequence[DetectionRecord]] = None,
) -> ClickEvents:
    clicks = POPCOUNT[batch.masks]
    histogram += np.bincount(clicks, minlength=config.CHANNELS + 1)
    if records is not None:
        histogram[0] += sum(1 for record in records if not any(record.clicked))
    else:
        histogram[0] += batch.pulse_count - batch.masks.size
    single = clicks == 1
    channels = LOWEST_BIT[batch.masks[single]]
    index = batch.pulse_index[single]
    return ClickEvents(
        pulse_index=index,
        channels=channels.astype(np.uint8),
        timestamps=index / batch.pulse_rate + channels * batch.bin_offset,
    )


def estimate_qber(batches: Iterable[DetectionBatch]) -> Tuple[float, float]:
    """
    Return the Monte-Carlo QBER and its binomial standard error.

    The QBER is the fraction of single click pulses that did not carry exactly
    one photon; it needs batches that still hold the emitted photon numbers.
    """
    singles = 0
    errors = 0
    for batch in batches:
        if batch.photons is None:
            msg = "Batches without photon numbers cannot estimate the QBER"
            raise InsufficientDataError(msg)
        single = POPCOUNT[batch.masks] == 1
        singles += int(single.sum())
        errors += int((batch.photons[single] != 1).sum())
    if singles == 0:
        msg = "No single clicks to estimate the QBER from"
        raise InsufficientDataError(msg)
    q = errors / singles
    return q, math.sqrt(q * (1.0 - q) / singles)


def channel_histogram(events: ClickEvents) -> IndexArray:
    """Return the number of single clicks per channel."""
    return np.bincount(events.channels, minlength=config.CHANNELS).astype(np.int64)


def stability_trace(
    events: Union[ClickEvents, FloatArray],
    interval: float,
    group: int,
    *,
    duration: Optional[float] = None,
) -> FloatArray:
    """
    Return the normalised mean count per group of consecutive windows.

    Events are counted in consecutive windows of ``interval`` seconds starting at
    time zero, the counts of each block of ``group`` windows are averaged and all
    points are divided by the mean over the whole record.  An incomplete final
    block is dropped.
    """
    if interval <= 0 or group < 1:
        msg = f"Need interval > 0 and group >= 1, got {interval} and {group}"
        raise ParameterDomainError(msg)
    times = events.timestamps if isinstance(events, ClickEvents) else np.asarray(events)
    if times.size == 0:
        return np.zeros(0, dtype=np.float64)
    span = float(times.max()) if duration is None else duration
    windows = max(int(math.floor(span / interval + 1e-9)), 1)
    slots = np.floor(times / interval).astype(np.int64)
    counts = np.bincount(slots[slots < windows], minlength=windows)[:windows]
    points = counts[: (windows // group) * group].reshape(-1, group).mean(axis=1)
    if points.size == 0 or points.mean() == 0:
        return np.zeros(0, dtype=np.float64)
    return np.asarray(points / points.mean(), dtype=np.float64)


def balance_gate(
    events: Union[ClickEvents, Iterable[int]],
    bounds: Tuple[float, float] = (config.BALANCE_LO, config.BALANCE_HI),
) -> BalanceDecision:
    """
    Accept a control interval when every channel frequency lies in ``bounds``.

    The bounds are inclusive.
    """
    lo, hi = bounds
    channels = (
        events.channels
        if isinstance(events, ClickEvents)
        else np.asarray(list(events), dtype=np.int64)
    )
    count = int(np.size(channels))
    if count == 0:
        return BalanceDecision(
            accepted=False,
            frequencies=(0.0,) * config.CHANNELS,
            count=0,
            reason="no events",
        )
    frequencies = np.bincount(channels, minlength=config.CHANNELS) / count
    tolerance = config.BALANCE_TOLERANCE
    outside = [
        channel
        for channel, value in enumerate(frequencies.tolist())
        if value < lo - tolerance or value > hi + tolerance
    ]
    which = ", ".join(f"{c}={frequencies[c]:.4f}" for c in outside)
    reason = f"channel frequency outside [{lo}, {hi}]: {which}" if outside else ""
    return BalanceDecision(
        accepted=not outside,
        frequencies=tuple(float(f) for f in frequencies),
        count=count,
        reason=reason,
    )


def control_intervals(
    events: ClickEvents,
    interval: float = config.CONTROL_INTERVAL,
    *,
    start: float = 0.0,
) -> Iterator[ClickEvents]:
    """
    Split events into consecutive control intervals of ``interval`` seconds.

    Intervals without events are yielded empty so the caller sees every one.
    """
    if interval <= 0:
        msg = f"Control interval must be positive, got {interval}"
        raise ParameterDomainError(msg)
    if not len(events):
        return
    slots = np.floor((events.timestamps - start) / interval).astype(np.int64)
    bounds = np.searchsorted(slots, np.arange(int(slots[-1]) + 2))
    for left, right in zip(bounds[:-1], bounds[1:]):
        yield events[int(left) : int(right)]
