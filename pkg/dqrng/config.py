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

"""Frequently used constants and configuration defaults."""
import logging
from typing import Final

__all__ = [
    "BALANCE_HI",
    "BALANCE_LO",
    "BIT_FILE_MAGIC",
    "CHANNELS",
    "CONTROL_INTERVAL",
    "DEFAULT_ALPHA",
    "DEFAULT_EPSILON",
    "EVENT_FILE_MAGIC",
    "FILE_VERSION",
    "MIN_BATTERY_BITS",
    "PULSE_RATE",
    "TOEPLITZ_BLOCK",
    "WIRE_MAGIC",
    "WIRE_VERSION",
    "configure_logging",
]

logger = logging.getLogger(__name__)

# optics
CHANNELS: Final = 4
PULSE_RATE: Final = 3e6
DEAD_TIME: Final = 25e-9
BIN_SPACING: Final = 50e-9
SIMULATION_CHUNK: Final = 1 << 18
DRIFT_CORRELATION_TIME: Final = 10.0
DRIFT_AMPLITUDE: Final = 0.05
DRIFT_STEP: Final = 1e-3

# balance routine
BALANCE_LO: Final = 0.24
BALANCE_HI: Final = 0.26
BALANCE_TOLERANCE: Final = 1e-12
CONTROL_INTERVAL: Final = 1.0
MAX_CONTROL_INTERVALS: Final = 100

# photon statistics
POISSON_TRUNCATION: Final = 32
POISSON_TAIL: Final = 1e-12
NEGATIVE_TOLERANCE: Final = 1e-9
PROBABILITY_TOLERANCE: Final = 1e-12

# statistical battery
DEFAULT_ALPHA: Final = 0.01
MIN_BATTERY_BITS: Final = 1_000_000
BLOCK_FREQUENCY_SIZE: Final = 128
SERIAL_BLOCK: Final = 2
APEN_BLOCK: Final = 2
MIN_UNIFORMITY_VALUES: Final = 5
MI_BIAS_FACTOR: Final = 10.0

# extraction
DEFAULT_EPSILON: Final = 2.0**-100
TOEPLITZ_BLOCK: Final = 1 << 16
# dense GF(2) product below this many matrix entries
DIRECT_PRODUCT_LIMIT: Final = 1 << 20

# files
BIT_FILE_MAGIC: Final = b"DQRNGBIT"
EVENT_FILE_MAGIC: Final = b"DQRNGEVT"
FILE_VERSION: Final = 1

# wire protocol
WIRE_MAGIC: Final = 0x51
WIRE_VERSION: Final = 0x01
MAX_FRAME_PAYLOAD: Final = 1 << 20
DATA_CHUNK: Final = 1 << 16
MAX_SESSIONS: Final = 64
SESSION_TIMEOUT: Final = 60.0
DEFAULT_PORT: Final = 5151

LOG_FORMAT: Final = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    """
    Configure the root logger for command line use.

    Library code never installs handlers, only the command line entry point does.
    """
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logger.debug("Logging configured at level %s", logging.getLevelName(level))
