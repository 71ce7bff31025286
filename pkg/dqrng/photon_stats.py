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
Photon counting statistics of a multiplexed detector array.

The functions in this module describe what an array of ``n`` inefficient,
noisy detectors reports when it is illuminated by a weak coherent pulse:

- `click_distribution` gives the probability of ``k`` simultaneous clicks when
  exactly ``N`` photons are spread uniformly over the array,
- `click_prob` mixes that over the Poisson photon number of the source,
- `qber` is the probability that a post-selected single click was *not* caused
  by exactly one photon,
- `extractable_length` turns the QBER into the number of ε-secure bits that can
  be distilled from ``T`` raw bits.

All functions are pure and safe to call concurrently.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import mpmath
import numpy as np
from scipy.stats import poisson

from dqrng import config
from dqrng.exceptions import InsufficientEntropyError
from dqrng.exceptions import InternalConsistencyError
from dqrng.exceptions import ParameterDomainError
from dqrng.exceptions import UndefinedConditionalError
from dqrng.types import FloatArray

__all__ = [
    "ExtractionParams",
    "NoiseModel",
    "click_distribution",
    "click_prob",
    "click_probabilities",
    "compression_rate",
    "extractable_length",
    "implied_qber",
    "multiphoton_ratio",
    "poisson_cutoff",
    "poisson_weights",
    "qber",
]

logger = logging.getLogger(__name__)

# decimal digits for the alternating sum
EXTENDED_DPS = 60


@dataclass(frozen=True)
class NoiseModel:
    """
    Source and detector parameters of the noise model.

    Attributes
    ----------
    mu : float
        Mean photon number per pulse, the squared coherent amplitude.
    eta : float
        Per-photon detection efficiency.
    dark_prob : float
        Dark count probability per detector and detection window.
    channels : int
        Number of detectors, or time bins of a single detector.
    truncation : int
        Starting photon number cut-off for the Poisson series. The cut-off is
        raised automatically until the neglected tail is below ``1e-12``.

    """

    mu: float
    eta: float = 1.0
    dark_prob: float = 0.0
    channels: int = config.CHANNELS
    truncation: int = config.POISSON_TRUNCATION

    def __post_init__(self) -> None:
        """Check the parameter domains."""
        if not 0.0 <= self.eta <= 1.0:
            msg = f"Detection efficiency must be in [0, 1], got {self.eta}"
            raise ParameterDomainError(msg)
        if not 0.0 <= self.dark_prob < 1.0:
            msg = f"Dark count probability must be in [0, 1), got {self.dark_prob}"
            raise ParameterDomainError(msg)
        if self.channels < 1:
            msg = f"At least one channel is required, got {self.channels}"
            raise ParameterDomainError(msg)
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            msg = f"Mean photon number must be finite and >= 0, got {self.mu}"
            raise ParameterDomainError(msg)
        if self.truncation < 1:
            msg = f"Poisson truncation must be >= 1, got {self.truncation}"
            raise ParameterDomainError(msg)

    @classmethod
    def from_amplitude(
        cls,
        alpha: float,
        *,
        eta: float = 1.0,
        dark_prob: float = 0.0,
        channels: int = config.CHANNELS,
    ) -> "NoiseModel":
        """Create a model from the coherent amplitude, the mean is ``|alpha|**2``."""
        return cls(
            mu=abs(alpha) ** 2,
            eta=eta,
            dark_prob=dark_prob,
            channels=channels,
        )

    @property
    def cutoff(self) -> int:
        """Photon number up to which the Poisson series is summed."""
        return poisson_cutoff(self.mu, self.truncation)


@dataclass(frozen=True)
class ExtractionParams:
    """
    Inputs of the extractable length formula.

    Attributes
    ----------
    raw_len : int
        Number of raw bits T before extraction.
    qber : float
        Fraction Q of single clicks not caused by exactly one photon.
    epsilon : float
        Security parameter, distance from uniform of the extracted bits.

    """

    raw_len: int
    qber: float
    epsilon: float = config.DEFAULT_EPSILON

    def __post_init__(self) -> None:
        """Check the parameter domains."""
        if self.raw_len < 1:
            msg = f"At least one raw bit is required, got {self.raw_len}"
            raise ParameterDomainError(msg)
        if not 0.0 <= self.qber <= 1.0:
            msg = f"QBER must be in [0, 1], got {self.qber}"
            raise ParameterDomainError(msg)
        if not 0.0 < self.epsilon < 1.0:
            msg = f"Security parameter must be in (0, 1), got {self.epsilon}"
            raise ParameterDomainError(msg)

    @property
    def penalty(self) -> float:
        """Bits lost to the security parameter, ``2 * log2(1 / epsilon)``."""
        return -2.0 * math.log2(self.epsilon)


def poisson_cutoff(mu: float, truncation: int = config.POISSON_TRUNCATION) -> int:
    """
    Return the photon number cut-off for a Poisson source of mean ``mu``.

    Starting from ``truncation`` the cut-off is doubled until the Poisson mass
    above it is below ``config.POISSON_TAIL``.
    """
    cutoff = truncation
    if mu == 0:
        return cutoff
    while poisson.sf(cutoff, mu) >= config.POISSON_TAIL:
        cutoff *= 2
    if cutoff != truncation:
        logger.debug("Poisson cut-off escalated from %d to %d", truncation, cutoff)
    return cutoff


def poisson_weights(
    mu: float,
    truncation: int = config.POISSON_TRUNCATION,
) -> FloatArray:
    """Return ``P(N)`` for ``N = 0 .. cutoff`` of a Poisson source of mean ``mu``."""
    cutoff = poisson_cutoff(mu, truncation)
    if mu == 0:
        weights = np.zeros(cutoff + 1)
        weights[0] = 1.0
        return weights
    return np.asarray(poisson.pmf(np.arange(cutoff + 1), mu), dtype=np.float64)


def _power(base: mpmath.mpf, exponent: int) -> mpmath.mpf:
    # 0 ** 0 is one here, a dark array with no photons is certain to stay dark
    return mpmath.mpf(1) if exponent == 0 else base**exponent


def _checked(value: mpmath.mpf, *, clicks: int, photons: int) -> float:
    tolerance = config.NEGATIVE_TOLERANCE
    if value < -tolerance or value > 1 + tolerance:
        msg = (
            f"Pr(k={clicks}|N={photons}) = {mpmath.nstr(value, 15)} "
            "is not a probability"
        )
        raise InternalConsistencyError(msg)
    return float(min(max(value, mpmath.mpf(0)), mpmath.mpf(1)))


@lru_cache(maxsize=4096)
def _click_distribution(
    photons: int,
    channels: int,
    eta: float,
    dark_prob: float,
) -> Tuple[float, ...]:
    n = channels
    with mpmath.workdps(EXTENDED_DPS):
        efficiency = mpmath.mpf(eta)
        quiet = 1 - mpmath.mpf(dark_prob)
        scale = _power(mpmath.mpf(n), photons)
        distribution = []
        for k in range(n + 1):
            # inclusion-exclusion over the detectors that stay silent
            terms = [
                (-1) ** l
                * _power(quiet, n - k + l)
                * mpmath.binomial(k, l)
                * _power(n - (n - k + l) * efficiency, photons)
                for l in range(k + 1)  # noqa: E741
            ]
            value = mpmath.binomial(n, k) * mpmath.fsum(terms) / scale
            distribution.append(_checked(value, clicks=k, photons=photons))
    return tuple(distribution)


def click_distribution(photons: int, model: NoiseModel) -> FloatArray:
    """
    Return ``Pr(k | N)`` for ``k = 0 .. n`` clicks when ``N`` photons arrive.

    Each photon lands on one of the ``n`` detectors with equal probability and is
    registered with probability ``eta``; every detector additionally fires a dark
    count with probability ``dark_prob``.  The alternating inclusion-exclusion sum
    is evaluated with mpmath in extended precision and the result is clamped
    to ``[0, 1]`` after a tolerance check.

    Parameters
    ----------
    photons : int
        Number of photons N in the pulse.
    model : NoiseModel
        Detector parameters, ``mu`` is not used.

    Returns
    -------
    FloatArray
        Probability vector of length ``model.channels + 1``.

    Raises
    ------
    ParameterDomainError
        If ``photons`` is negative.
    InternalConsistencyError
        If an entry falls outside ``[0, 1]`` by more than ``1e-9``.

    """
    if photons < 0:
        msg = f"Photon number must be >= 0, got {photons}"
        raise ParameterDomainError(msg)
    return np.array(
        _click_distribution(photons, model.channels, model.eta, model.dark_prob),
        dtype=np.float64,
    )


@lru_cache(maxsize=1024)
def _click_probabilities(model: NoiseModel) -> Tuple[float, ...]:
    weights = poisson_weights(model.mu, model.truncation)
    table = np.array(
        [
            _click_distribution(n, model.channels, model.eta, model.dark_prob)
            for n in range(len(weights))
        ],
    )
    return tuple(float(p) for p in weights @ table)


def click_probabilities(model: NoiseModel) -> FloatArray:
    """Return ``p(k)`` for ``k = 0 .. n``, mixed over the Poisson photon number."""
    return np.array(_click_probabilities(model), dtype=np.float64)


def click_prob(clicks: int, model: NoiseModel) -> float:
    """
    Return the probability ``p(k)`` of exactly ``clicks`` detectors firing.

    The photon number distribution is Poisson with mean ``model.mu``, summed up
    to ``model.cutoff``.
    """
    if not 0 <= clicks <= model.channels:
        msg = f"Number of clicks must be in [0, {model.channels}], got {clicks}"
        raise ParameterDomainError(msg)
    return _click_probabilities(model)[clicks]


def multiphoton_ratio(model: NoiseModel) -> float:
    """Return ``p(2) / p(1)``, the expected ratio of double to single clicks."""
    if model.channels < 2:  # noqa: PLR2004
        return 0.0
    single = click_prob(1, model)
    if single <= 0:
        msg = "p(k=1) is zero, the multi-click ratio is undefined"
        raise UndefinedConditionalError(msg)
    return click_prob(2, model) / single


def qber(model: NoiseModel) -> float:
    """
    Return the quantum bit error ratio ``Q = 1 - Pr(N=1 | k=1)``.

    Bayes rule gives ``Pr(N=1 | k=1) = Pr(k=1 | N=1) P(N=1) / p(k=1)``
    with ``P(N=1) = exp(-mu) mu``.

    Raises
    ------
    UndefinedConditionalError
        If single clicks are impossible under the model.
    InternalConsistencyError
        If the ratio leaves ``[0, 1]`` by more than ``1e-9``.

    """
    single = click_prob(1, model)
    if single <= 0:
        msg = f"p(k=1) is zero for {model}, Pr(N=1|k=1) is undefined"
        raise UndefinedConditionalError(msg)
    one_photon = math.exp(-model.mu) * model.mu
    posterior = click_distribution(1, model)[1] * one_photon / single
    q = 1.0 - posterior
    if q < -config.NEGATIVE_TOLERANCE or q > 1 + config.NEGATIVE_TOLERANCE:
        msg = f"QBER {q} is outside [0, 1]"
        raise InternalConsistencyError(msg)
    q = min(max(q, 0.0), 1.0)
    logger.debug("QBER for %s is %.9f", model, q)
    return q


def extractable_length(params: ExtractionParams) -> int:
    """
    Return ``l_q = floor(T * (1 - Q) - 2 * log2(1 / epsilon))``.

    Raises
    ------
    InsufficientEntropyError
        If no bit can be extracted.

    """
    raw = params.raw_len
    # rounded to nine decimals first so that T - T*Q lands on whole bits exactly
    length = math.floor(round(raw - raw * params.qber - params.penalty, 9))
    if length <= 0:
        msg = (
            f"No secure bits can be extracted from {raw} raw bits with "
            f"Q={params.qber} and epsilon={params.epsilon:g} (l_q={length})"
        )
        raise InsufficientEntropyError(msg)
    return length


def compression_rate(params: ExtractionParams) -> float:
    """Return ``R = l_q / T``."""
    return extractable_length(params) / params.raw_len


def implied_qber(
    rate: float,
    raw_len: int,
    epsilon: float = config.DEFAULT_EPSILON,
) -> float:
    """
    Return the QBER that yields the compression ``rate`` for ``raw_len`` bits.

    Inverts `extractable_length`, ignoring the floor.  Useful when a rate is
    known but the detector efficiency and dark counts behind it are not.
    """
    penalty = ExtractionParams(raw_len=raw_len, qber=0.0, epsilon=epsilon).penalty
    q = 1.0 - (rate * raw_len + penalty) / raw_len
    if not 0.0 <= q <= 1.0:
        msg = f"Rate {rate} is not reachable with {raw_len} bits"
        raise ParameterDomainError(msg)
    return q
