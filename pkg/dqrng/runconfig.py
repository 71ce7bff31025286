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
Run configuration.

A run is configured by one JSON document; every key is optional and falls back
to the defaults in `dqrng.config`.  Unknown keys are rejected.  Command line
flags are applied on top as dotted overrides, flags win::

    {
        "scheme": {
            "scheme": "spatial",
            "pulse_rate": 3e6,
            "channel_probs": [0.25, 0.25, 0.25, 0.25],
            "noise": {"mu": 0.1, "eta": 1.0, "dark_prob": 0.0},
            "drift": {"mode": "none"},
            "seed": 1
        },
        "balance": {"lo": 0.24, "hi": 0.26, "interval": 1.0, "max_intervals": 100},
        "target_bits": 1000000,
        "criteria_id": "default",
        "extraction": {"epsilon": 7.888609052210118e-31, "seed": 2},
        "verifier": {"host": "127.0.0.1", "port": 5151, "token": "..."},
        "output_dir": "run"
    }
"""
import copy
import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any
from typing import Callable
from typing import Dict
from typing import Mapping
from typing import Optional
from typing import Tuple
from typing import TypeVar
from typing import Union

from dqrng import config
from dqrng.enums import DriftMode
from dqrng.enums import Role
from dqrng.enums import Scheme
from dqrng.exceptions import ConfigurationError
from dqrng.exceptions import DQRNGError
from dqrng.files import read_json
from dqrng.optics import DriftConfig
from dqrng.optics import SchemeConfig
from dqrng.photon_stats import NoiseModel
from dqrng.registry import Criteria
from dqrng.sequences import ProbVector

__all__ = [
    "BalanceConfig",
    "ExtractionConfig",
    "RunConfig",
    "VerifierSettings",
    "apply_overrides",
    "load_run_config",
    "parse_run_config",
]

logger = logging.getLogger(__name__)

T = TypeVar("T")
Document = Dict[str, Any]
PROB_KEYS = ("p1", "p2", "p3", "p4")


@dataclass(frozen=True)
class BalanceConfig:
    """Acceptance window of the balance routine."""

    lo: float = config.BALANCE_LO
    hi: float = config.BALANCE_HI
    interval: float = config.CONTROL_INTERVAL
    max_intervals: int = config.MAX_CONTROL_INTERVALS

    def __post_init__(self) -> None:
        """Check the bounds."""
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            msg = f"Balance bounds must satisfy 0 <= lo <= hi <= 1, got {self.bounds}"
            raise ConfigurationError(msg)
        if self.interval <= 0 or self.max_intervals < 1:
            msg = "Control interval and maximum interval count must be positive"
            raise ConfigurationError(msg)

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.lo, self.hi


@dataclass(frozen=True)
class ExtractionConfig:
    """
    Privacy amplification settings.

    ``qber`` overrides the value computed from the noise model.
    """

    epsilon: float = config.DEFAULT_EPSILON
    qber: Optional[float] = None
    seed: int = 0
    block_size: int = config.TOEPLITZ_BLOCK
    workers: int = 1


@dataclass(frozen=True)
class VerifierSettings:
    """Where the verifier is and how to talk to it, or how to run one."""

    host: str = "127.0.0.1"
    port: int = config.DEFAULT_PORT
    token: str = ""
    tokens: Mapping[Role, str] = field(default_factory=dict)
    loopback: bool = False
    storage: Path = Path("verifier")
    timeout: float = config.SESSION_TIMEOUT
    max_sessions: int = config.MAX_SESSIONS
    chunk_size: int = config.DATA_CHUNK

    @property
    def endpoint(self) -> Tuple[str, int]:
        return self.host, self.port


@dataclass(frozen=True)
class RunConfig:
    """Everything one run of the protocol loop needs."""

    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    target_bits: int = config.MIN_BATTERY_BITS
    criteria_id: str = "default"
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    verifier: VerifierSettings = field(default_factory=VerifierSettings)
    output_dir: Path = Path("run")
    audit: bool = True
    criteria: Tuple[Criteria, ...] = ()

    def __post_init__(self) -> None:
        """Check the target length."""
        if self.target_bits < 1:
            msg = f"Target length must be positive, got {self.target_bits}"
            raise ConfigurationError(msg)


def _take(
    document: Any,
    section: str,
    known: Mapping[str, Callable[[Any], Any]],
) -> Document:
    """Convert the known keys of a section, reject any other key."""
    if not isinstance(document, dict):
        msg = f"Section {section or 'root'} must be a JSON object"
        raise ConfigurationError(msg)
    unknown = sorted(set(document) - set(known))
    if unknown:
        msg = f"Unknown key(s) in {section or 'root'}: {', '.join(unknown)}"
        raise ConfigurationError(msg)
    values = {}
    for key, value in document.items():
        try:
            values[key] = known[key](value)
        except (TypeError, ValueError) as error:
            msg = f"Invalid value for {section + '.' if section else ''}{key}: {error}"
            raise ConfigurationError(msg) from error
    return values


def _build(cls: Callable[..., T], section: str, values: Document) -> T:
    try:
        return cls(**values)
    except DQRNGError as error:
        msg = f"Invalid {section or 'run'} configuration: {error}"
        raise ConfigurationError(msg) from error


def _float_tuple(value: Any) -> Tuple[float, ...]:
    return tuple(float(v) for v in value)


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


def _bool(value: Any) -> bool:
    if not isinstance(value, bool):
        msg = f"expected true or false, got {value!r}"
        raise TypeError(msg)
    return value


def _noise(value: Any) -> NoiseModel:
    values = _take(
        value,
        "scheme.noise",
        {"mu": float, "eta": float, "dark_prob": float, "truncation": int},
    )
    return _build(NoiseModel, "scheme.noise", values)


def _drift(value: Any) -> DriftConfig:
    values = _take(
        value,
        "scheme.drift",
        {
            "mode": DriftMode,
            "correlation_time": float,
            "amplitude": float,
            "step": float,
        },
    )
    return _build(DriftConfig, "scheme.drift", values)


def _probs(value: Any) -> ProbVector:
    probs = _float_tuple(value)
    if len(probs) != config.CHANNELS:
        msg = f"expected four probabilities, got {len(probs)}"
        raise ValueError(msg)
    return _build(ProbVector, "scheme.channel_probs", dict(zip(PROB_KEYS, probs)))


def _scheme(value: Any) -> SchemeConfig:
    values = _take(
        value,
        "scheme",
        {
            "scheme": Scheme,
            "pulse_rate": float,
            "channel_probs": _probs,
            "noise": _noise,
            "dead_time": float,
            "bin_spacing": float,
            "drift": _drift,
            "seed": int,
            "channel_efficiency": _float_tuple,
            "workers": int,
        },
    )
    return _build(SchemeConfig, "scheme", values)


def _balance(value: Any) -> BalanceConfig:
    values = _take(
        value,
        "balance",
        {"lo": float, "hi": float, "interval": float, "max_intervals": int},
    )
    return _build(BalanceConfig, "balance", values)


def _extraction(value: Any) -> ExtractionConfig:
    values = _take(
        value,
        "extraction",
        {
            "epsilon": float,
            "qber": _optional_float,
            "seed": int,
            "block_size": int,
            "workers": int,
        },
    )
    return _build(ExtractionConfig, "extraction", values)


def _tokens(value: Any) -> Dict[Role, str]:
    return {Role(role): str(token) for role, token in dict(value).items()}


def _verifier(value: Any) -> VerifierSettings:
    values = _take(
        value,
        "verifier",
        {
            "host": str,
            "port": int,
            "token": str,
            "tokens": _tokens,
            "loopback": _bool,
            "storage": Path,
            "timeout": float,
            "max_sessions": int,
            "chunk_size": int,
        },
    )
    return _build(VerifierSettings, "verifier", values)


def _criteria(value: Any) -> Tuple[Criteria, ...]:
    entries = []
    for entry in value:
        values = _take(
            entry,
            "criteria",
            {
                "criteria_id": str,
                "alpha": float,
                "min_bits": int,
                "require_uniformity": _bool,
                "tests": lambda tests: tuple(str(t) for t in tests),
                "block_size": int,
                "serial_block": int,
                "apen_block": int,
            },
        )
        entries.append(_build(Criteria, "criteria", values))
    return tuple(entries)


def apply_overrides(document: Document, overrides: Mapping[str, Any]) -> Document:
    """
    Return a copy of ``document`` with dotted keys set, ``None`` values skipped.

    >>> apply_overrides({"scheme": {"seed": 1}}, {"scheme.seed": 2})
    {'scheme': {'seed': 2}}
    """
    result = copy.deepcopy(document)
    for dotted, value in overrides.items():
        if value is None:
            continue
        *parents, key = dotted.split(".")
        node = result
        for parent in parents:
            node = node.setdefault(parent, {})
            if not isinstance(node, dict):
                msg = f"Cannot override {dotted}, {parent} is not a section"
                raise ConfigurationError(msg)
        logger.debug("Override %s = %r", dotted, value)
        node[key] = value
    return result


def parse_run_config(document: Document) -> RunConfig:
    """
    Build a `RunConfig` from a parsed JSON document.

    Raises
    ------
    ConfigurationError
        On unknown keys or values outside their domain.

    """
    values = _take(
        document,
        "",
        {
            "scheme": _scheme,
            "balance": _balance,
            "target_bits": int,
            "criteria_id": str,
            "extraction": _extraction,
            "verifier": _verifier,
            "output_dir": Path,
            "audit": _bool,
            "criteria": _criteria,
        },
    )
    return _build(RunConfig, "", values)


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Load a run configuration file and apply command line overrides."""
    document: Document = {}
    if path is not None:
        loaded = read_json(path)
        if not isinstance(loaded, dict):
            msg = f"{path} must contain a JSON object"
            raise ConfigurationError(msg)
        document = loaded
        logger.info("Loaded run configuration from %s", path)
    return parse_run_config(apply_overrides(document, overrides or {}))
