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
"""Shared helpers and mixins for the tests."""
import shutil
import tempfile
from pathlib import Path
from typing import Any
from typing import Dict

import numpy as np
from bitarray import bitarray

from dqrng.enums import Role
from dqrng.helpers import bits_from_array
from dqrng.optics import SchemeConfig
from dqrng.photon_stats import NoiseModel
from dqrng.registry import Criteria
from dqrng.verifier import VerifierConfig
from dqrng.verifier import VerifierServer

# small enough for desk sized inputs, lenient enough not to reject good ones
TEST_CRITERIA = Criteria("test", alpha=1e-4, min_bits=1_000)

TOKENS: Dict[Role, str] = {
    Role.device: "device-token",
    Role.auditor: "auditor-token",
    Role.reader: "reader-token",
}


def random_bits(length: int, seed: int) -> bitarray:
    """Return ``length`` uniformly random bits."""
    rng = np.random.default_rng(seed)
    return bits_from_array(rng.integers(0, 2, length))


def scheme(**changes: Any) -> SchemeConfig:
    """Return a spatial scheme at mean photon number 0.1 with ``changes``."""
    values: Dict[str, Any] = {"noise": NoiseModel(mu=0.1), "seed": 7}
    values.update(changes)
    return SchemeConfig(**values)


class Loopback:
    """
    Run a verifier on an ephemeral port for every test method.

    Use this mixin as the first base class in the test classes.
    """

    max_sessions = 8

    def setup_method(self) -> None:
        """Start the verifier in a background thread."""
        self.storage = Path(tempfile.mkdtemp(prefix="dqrng-verifier-"))
        self.server = VerifierServer(
            VerifierConfig(
                storage=self.storage,
                tokens=TOKENS,
                port=0,
                max_sessions=self.max_sessions,
                timeout=10.0,
                criteria=(TEST_CRITERIA,),
            ),
        )
        self.server.start()
        self.endpoint = self.server.address

    def teardown_method(self) -> None:
        """Stop the verifier and drop its storage."""
        self.server.stop()
        shutil.rmtree(self.storage, ignore_errors=True)
