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
Artifact files.

Packed bit files::

    8 bytes   magic b"DQRNGBIT"
    1 byte    format version
    8 bytes   bit count, unsigned little endian
    payload   bits packed most significant bit first, pad bits zero

Event files hold the detection records of a simulation run::

    8 bytes   magic b"DQRNGEVT"
    1 byte    format version
    1 byte    scheme, 0 spatial, 1 temporal
    8 bytes   first pulse index, unsigned little endian
    8 bytes   number of pulses covered, unsigned little endian
    8 bytes   pulse rate in Hz, little endian double
    8 bytes   bin offset in seconds, little endian double
    records   8 byte pulse index (little endian) and 1 byte click mask

Only pulses with at least one click have a record; every other pulse of the
covered range stayed dark.  Reports, manifests and summaries are JSON, traces
are CSV.
"""
import csv
import json
import logging
import struct
from pathlib import Path
from typing import Any
from typing import Iterable
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from bitarray import bitarray

from dqrng import config
from dqrng.enums import Scheme
from dqrng.exceptions import FormatError
from dqrng.helpers import bits_from_bytes
from dqrng.optics import DetectionBatch

__all__ = [
    "EVENT_RECORD",
    "export_bits",
    "read_bits",
    "read_events",
    "read_json",
    "write_bits",
    "write_csv",
    "write_events",
    "write_json",
]

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BIT_HEADER = struct.Struct("<8sBQ")
EVENT_HEADER = struct.Struct("<8sBBQQdd")
EVENT_RECORD = np.dtype([("pulse", "<u8"), ("mask", "u1")])
SCHEME_CODES = {Scheme.spatial: 0, Scheme.temporal: 1}


def encode_bits(bits: bitarray) -> bytes:
    """Return the bytes of a packed bit file."""
    header = BIT_HEADER.pack(config.BIT_FILE_MAGIC, config.FILE_VERSION, len(bits))
    return header + bits.tobytes()


def decode_bits(data: bytes) -> bitarray:
    """
    Parse the bytes of a packed bit file.

    Raises
    ------
    FormatError
        If the magic, version or length do not match.

    """
    if len(data) < BIT_HEADER.size:
        msg = f"Bit file too short for its header: {len(data)} bytes"
        raise FormatError(msg)
    magic, version, count = BIT_HEADER.unpack_from(data)
    if magic != config.BIT_FILE_MAGIC:
        msg = f"Not a packed bit file, magic is {magic!r}"
        raise FormatError(msg)
    if version != config.FILE_VERSION:
        msg = f"Unsupported bit file version {version}"
        raise FormatError(msg)
    return bits_from_bytes(data[BIT_HEADER.size :], count)


def write_bits(path: PathLike, bits: bitarray) -> Path:
    """Write a packed bit file."""
    path = Path(path)
    path.write_bytes(encode_bits(bits))
    logger.debug("Wrote %d bits to %s", len(bits), path)
    return path


def read_bits(path: PathLike) -> bitarray:
    """Read a packed bit file."""
    return decode_bits(Path(path).read_bytes())


def write_events(
    path: PathLike,
    batches: Iterable[DetectionBatch],
    scheme: Scheme,
) -> Path:
    """
    Write consecutive detection batches to an event file.

    Raises
    ------
    FormatError
        If the batches do not cover one contiguous range of pulses.

    """
    path = Path(path)
    parts = list(batches)
    if not parts:
        msg = "No detection batches to write"
        raise FormatError(msg)
    for previous, current in zip(parts, parts[1:]):
        if current.start != previous.end:
            msg = f"Batches are not contiguous at pulse {current.start}"
            raise FormatError(msg)
    first = parts[0]
    records = np.zeros(sum(part.masks.size for part in parts), dtype=EVENT_RECORD)
    records["pulse"] = np.concatenate([part.pulse_index for part in parts])
    records["mask"] = np.concatenate([part.masks for part in parts])
    header = EVENT_HEADER.pack(
        config.EVENT_FILE_MAGIC,
        config.FILE_VERSION,
        SCHEME_CODES[scheme],
        first.start,
        parts[-1].end - first.start,
        first.pulse_rate,
        first.bin_offset,
    )
    with path.open("wb") as stream:
        stream.write(header)
        stream.write(records.tobytes())
    logger.info(
        "Wrote %d records covering %d pulses to %s",
        records.size,
        parts[-1].end - first.start,
        path,
    )
    return path


def read_events(path: PathLike) -> Tuple[DetectionBatch, Scheme]:
    """
    Read an event file back into one batch.

    Raises
    ------
    FormatError
        If the header is corrupt or the records are truncated.

    """
    data = Path(path).read_bytes()
    if len(data) < EVENT_HEADER.size:
        msg = f"Event file too short for its header: {len(data)} bytes"
        raise FormatError(msg)
    (
        magic,
        version,
        code,
        start,
        count,
        pulse_rate,
        bin_offset,
    ) = EVENT_HEADER.unpack_from(data)
    if magic != config.EVENT_FILE_MAGIC:
        msg = f"Not an event file, magic is {magic!r}"
        raise FormatError(msg)
    if version != config.FILE_VERSION:
        msg = f"Unsupported event file version {version}"
        raise FormatError(msg)
    schemes = {value: key for key, value in SCHEME_CODES.items()}
    if code not in schemes:
        msg = f"Unknown scheme code {code}"
        raise FormatError(msg)
    body = data[EVENT_HEADER.size :]
    if len(body) % EVENT_RECORD.itemsize:
        msg = f"Event records truncated: {len(body)} bytes"
        raise FormatError(msg)
    records = np.frombuffer(body, dtype=EVENT_RECORD)
    batch = DetectionBatch(
        start=start,
        pulse_count=count,
        pulse_index=records["pulse"].astype(np.int64),
        masks=records["mask"].copy(),
        pulse_rate=pulse_rate,
        bin_offset=bin_offset,
    )
    return batch, schemes[code]


def export_bits(source: PathLike, target: PathLike) -> int:
    """
    Export a packed bit file as raw bytes for external test suites.

    The bytes keep the most significant bit first packing.  A JSON sidecar
    ``<target>.json`` records the exact bit count.  Returns the number of bits.
    """
    bits = read_bits(source)
    target = Path(target)
    if not bits:
        logger.warning("Bit file %s is empty, exporting nothing", source)
    target.write_bytes(bits.tobytes())
    sidecar = target.with_name(target.name + ".json")
    write_json(sidecar, {"bit_count": len(bits), "source": str(source)})
    return len(bits)


def write_json(path: PathLike, document: Any) -> Path:
    """Write a JSON document with sorted keys."""
    path = Path(path)
    text = json.dumps(document, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Any:
    """
    Read a JSON document.

    Raises
    ------
    FormatError
        If the file is not valid JSON.

    """
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as error:
        msg = f"{path} is not valid JSON: {error}"
        raise FormatError(msg) from error


def write_csv(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> Path:
    """Write a plot-ready CSV table."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream)
        writer.writerow(header)
        writer.writerows(rows)
    return path
