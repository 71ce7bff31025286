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
"""Test the criteria registry."""
import pytest

from dqrng.exceptions import CriteriaRejectedError
from dqrng.exceptions import ParameterDomainError
from dqrng.registry import Criteria
from dqrng.registry import CriteriaRegistry
from dqrng.registry import registry


def test_registry_get() -> None:
    """Test the registry."""
    criteria = CriteriaRegistry()
    criteria.register(Criteria("a"))
    criteria.register(Criteria("b", alpha=0.05))

    assert criteria.get("b").alpha == 0.05
    assert "a" in criteria
    assert list(criteria) == ["a", "b"]


def test_registry_get_unknown() -> None:
    criteria = CriteriaRegistry()
    criteria.register(Criteria("b"))
    criteria.register(Criteria("a"))

    with pytest.raises(CriteriaRejectedError, match="Known criteria are a, b"):
        criteria.get("c")


def test_registry_replace(caplog: pytest.LogCaptureFixture) -> None:
    criteria = CriteriaRegistry()
    criteria.register(Criteria("a"))

    criteria.register(Criteria("a", alpha=0.001))

    assert criteria.get("a").alpha == 0.001
    assert "Replacing criteria 'a'" in caplog.text


def test_registry_copy_is_independent() -> None:
    copy = registry.copy()

    copy.register(Criteria("only-in-copy"))

    assert "only-in-copy" in copy
    assert "only-in-copy" not in registry


def test_registry_repr() -> None:
    criteria = CriteriaRegistry()

    assert repr(criteria) == "dqrng.registry.CriteriaRegistry({})"


def test_default_registry() -> None:
    assert list(registry) == ["default", "desk", "lenient", "strict"]
    assert registry.get("strict").require_uniformity
    assert registry.get("desk").min_bits < registry.get("default").min_bits


@pytest.mark.parametrize(
    "values",
    [
        {"alpha": 0.0},
        {"alpha": 1.0},
        {"min_bits": 0},
        {"tests": ()},
        {"tests": ("monobit", "dieharder")},
        {"serial_block": 1},
        {"apen_block": 0},
    ],
)
def test_criteria_validation(values: dict) -> None:
    with pytest.raises(ParameterDomainError):
        Criteria("bad", **values)


def test_criteria_with_overrides() -> None:
    criteria = Criteria("a")

    changed = criteria.with_overrides(alpha=0.05, tests=("runs",))

    assert changed.alpha == 0.05
    assert changed.tests == ("runs",)
    assert criteria.alpha == 0.01
