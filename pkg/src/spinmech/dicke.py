"""Dicke-basis weights of the N-spin product state and the induced angle spread."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidInputError

__all__ = ["DickeWeights", "dicke_weights", "ghz_component_weight", "OrientationDistribution", "orientation_distribution"]

_MAX_N = 10**7


_EXACT_N = 1000


@dataclass
class DickeWeights:
    n_spins: int
    log_weights: np.ndarray
    # correctly rounded C(N, k) / 2**N when available
    exact_probabilities: np.ndarray | None = field(default=None, repr=False)

    @property
    def weights(self) -> np.ndarray:
        if self.exact_probabilities is not None:
            return np.sqrt(self.exact_probabilities)
        return np.exp(self.log_weights)

    @property
    def probabilities(self) -> np.ndarray:
        if self.exact_probabilities is not None:
            return self.exact_probabilities.copy()
        return np.exp(2.0 * self.log_weights)

    def normalization(self) -> float:
        return float(np.exp(logsumexp(2.0 * self.log_weights)))


def _check_n(n_spins, upper=_MAX_N) -> int:
    if isinstance(n_spins, float) and not n_spins.is_integer():
        raise InvalidInputError("n_spins must be an integer")
    n = int(n_spins)
    if not 1 <= n <= upper:
        raise InvalidInputError(f"n_spins must lie in [1, {upper}]")
    return n


def dicke_weights(n_spins: int) -> DickeWeights:
    """``log w_k = (log C(N, k) - N log 2) / 2`` for k = 0..N.

    Up to N = 1000 the probabilities are formed exactly and rounded once.

    ``N log 2`` is replaced by the log-sum of the computed binomials, which
    is the same number in exact arithmetic but cancels the rounding of
    ``gammaln(N + 1)`` at large N.
    """
    n = _check_n(n_spins)
    if n <= _EXACT_N:
        # integer true division rounds once, and 2**-N stays a normal double
        denom = 2**n
        p = np.array([math.comb(n, k) / denom for k in range(n + 1)])
        return DickeWeights(n, 0.5 * np.log(p), p)
    k = np.arange(n + 1, dtype=float)
    log_binom = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    # symmetrise so w_k and w_{N-k} are bitwise equal
    log_binom = 0.5 * (log_binom + log_binom[::-1])
    return DickeWeights(n, 0.5 * (log_binom - logsumexp(log_binom)))


def ghz_component_weight(n_spins: int, log2: bool = False) -> float:
    """Probability ``2**-N`` of the all-zero (equally, all-one) Dicke state."""
    n = _check_n(n_spins, upper=math.inf)
    if log2:
        return -float(n)
    return math.ldexp(1.0, -n) if n < 1075 else 0.0


@dataclass
class OrientationDistribution:
    n_spins: int
    theta_per_spin: float
    mean: float
    std: float

    def support(self) -> np.ndarray:
        return np.arange(self.n_spins + 1) * self.theta_per_spin

    def probabilities(self) -> np.ndarray:
        return dicke_weights(self.n_spins).probabilities


def orientation_distribution(n_spins: int, theta_per_spin: float) -> OrientationDistribution:
    """Binomial(N, 1/2) over angles ``k theta``; moments in closed form."""
    n = _check_n(n_spins, upper=math.inf)
    if not math.isfinite(theta_per_spin):
        raise InvalidInputError("theta_per_spin must be finite")
    return OrientationDistribution(n, theta_per_spin, 0.5 * n * theta_per_spin, 0.5 * math.sqrt(n) * abs(theta_per_spin))
