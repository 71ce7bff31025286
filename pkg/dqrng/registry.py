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
Registry of verification criteria.

Device operator and verifier agree on a ``criteria_id`` before any bits are
streamed.  The id names a frozen `Criteria` entry: which tests of the battery are
run, the significance level, the minimum sequence length and whether the
uniformity of the p-values is part of the verdict.
"""
import logging
from dataclasses import dataclass
from dataclasses import replace
from typing import Dict
from typing import Iterator
from typing import Optional
from typing import Tuple

from dqrng import config
from dqrng.exceptions import CriteriaRejectedError
from dqrng.exceptions import ParameterDomainError

__all__ = ["ALL_TESTS", "Criteria", "CriteriaRegistry", "registry"]

logger = logging.getLogger(__name__)

ALL_TESTS: Tuple[str, ...] = (
    "monobit",
    "block_frequency",
    "runs",
    "longest_run",
    "serial",
    "approximate_entropy",
    "cumulative_sums",
    "spectral",
)


@dataclass(frozen=True)
class Criteria:
    """Battery parameters the verdict is judged against."""

    criteria_id: str
    alpha: float = config.DEFAULT_ALPHA
    min_bits: int = config.MIN_BATTERY_BITS
    require_uniformity: bool = False
    tests: Tuple[str, ...] = ALL_TESTS
    block_size: int = config.BLOCK_FREQUENCY_SIZE
    serial_block: int = config.SERIAL_BLOCK
    apen_block: int = config.APEN_BLOCK

    def __post_init__(self) -> None:
        """Check the parameter domains."""
        if not 0.0 < self.alpha < 1.0:
            msg = f"Significance level must be in (0, 1), got {self.alpha}"
            raise ParameterDomainError(msg)
        if self.min_bits < 1:
            msg = f"Minimum length must be positive, got {self.min_bits}"
            raise ParameterDomainError(msg)
        unknown = sorted(set(self.tests) - set(ALL_TESTS))
        if unknown or not self.tests:
            msg = f"Unknown or empty test selection: {unknown or self.tests}"
            raise ParameterDomainError(msg)
        if self.serial_block < 2 or self.apen_block < 1:  # noqa: PLR2004
            msg = "Serial block must be >= 2 and approximate entropy block >= 1"
            raise ParameterDomainError(msg)

    def with_overrides(self, **changes: object) -> "Criteria":
        """Return a copy with some parameters replaced."""
        return replace(self, **changes)  # type: ignore[arg-type]


class CriteriaRegistry:
    """A registry of verification criteria keyed by id."""

    _registry: Dict[str, Criteria]

    def __init__(self, registry: Optional[Dict[str, Criteria]] = None) -> None:
        """Initialize the registry."""
        self._registry = registry or {}

    def __repr__(self) -> str:
        """Create a string (c)representation for CriteriaRegistry."""
        return (
            f"{self.__class__.__module__}.{self.__class__.__name__}({self._registry})"
        )

    def __contains__(self, criteria_id: object) -> bool:
        """Return True if the id is registered."""
        return criteria_id in self._registry

    def __iter__(self) -> Iterator[str]:
        """Iterate over the registered ids."""
        return iter(sorted(self._registry))

    def register(self, criteria: Criteria) -> None:
        """Register criteria, replacing an existing entry with the same id."""
        if criteria.criteria_id in self._registry:
            logger.warning("Replacing criteria %r", criteria.criteria_id)
        self._registry[criteria.criteria_id] = criteria

    def get(self, criteria_id: str) -> Criteria:
        """
        Get criteria by id.

        Raises
        ------
        CriteriaRejectedError
            If the id is not registered.

        """
        try:
            return self._registry[criteria_id]
        except KeyError as error:
            msg = (
                f"Unknown criteria '{criteria_id}'. "
                f"Known criteria are {', '.join(self)}."
            )
            raise CriteriaRejectedError(msg) from error

    def copy(self) -> "CriteriaRegistry":
        """Return an independent registry with the same entries."""
        return CriteriaRegistry(dict(self._registry))


registry = CriteriaRegistry()
registry.register(Criteria("default"))
registry.register(Criteria("strict", require_uniformity=True))
registry.register(Criteria("lenient", alpha=1e-4))
registry.register(Criteria("desk", min_bits=100_000))
