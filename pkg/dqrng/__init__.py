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
dqrng simulates a linear-optics quantum random number generator and verifies it
by delegation.

Single photon clicks on four detectors are encoded into two correlated bit
sequences.  Only the public sequence leaves the device: a remote verifier runs
the statistical battery on it and publishes a verdict, while the private
sequence is compressed by a Toeplitz hash into the final random output.
"""
from dqrng.about import __version__  # noqa: F401
from dqrng.battery import TestReport
from dqrng.battery import run_battery
from dqrng.client import audit_retrieve
from dqrng.client import device_submit
from dqrng.client import fetch_verdict
from dqrng.extractor import ToeplitzSeed
from dqrng.extractor import extract
from dqrng.extractor import extract_blocks
from dqrng.extractor import plan_extraction
from dqrng.optics import SchemeConfig
from dqrng.optics import Simulator
from dqrng.optics import balance_gate
from dqrng.optics import post_select
from dqrng.photon_stats import ExtractionParams
from dqrng.photon_stats import NoiseModel
from dqrng.photon_stats import click_prob
from dqrng.photon_stats import extractable_length
from dqrng.photon_stats import qber
from dqrng.pipeline import run_protocol
from dqrng.registry import Criteria
from dqrng.runconfig import RunConfig
from dqrng.runconfig import load_run_config
from dqrng.sequences import PairedSequences
from dqrng.sequences import ProbVector
from dqrng.sequences import encode_clicks
from dqrng.verifier import VerifierConfig
from dqrng.verifier import VerifierServer

__all__ = [
    "NoiseModel",
    "ExtractionParams",
    "click_prob",
    "qber",
    "extractable_length",
    "SchemeConfig",
    "Simulator",
    "post_select",
    "balance_gate",
    "ProbVector",
    "PairedSequences",
    "encode_clicks",
    "Criteria",
    "TestReport",
    "run_battery",
    "ToeplitzSeed",
    "extract",
    "plan_extraction",
    "extract_blocks",
    "VerifierConfig",
    "VerifierServer",
    "device_submit",
    "audit_retrieve",
    "fetch_verdict",
    "RunConfig",
    "load_run_config",
    "run_protocol",
]
