"""Binary gain/loss CTMC and discrete Gamma rate categories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ..errors import DomainError

ALPHA_MIN = 0.0201
ALPHA_MAX = 100.0


@dataclass(frozen=True)
class BinaryCTMC:
    """Reversible two-state chain; branch lengths are expected changes per character."""

    pi0: float = 0.5
    pi1: float = 0.5

    def __post_init__(self):
        if not (self.pi0 > 0 and self.pi1 > 0) or abs(self.pi0 + self.pi1 - 1.0) > 1e-9:
            raise DomainError(f"invalid stationary frequencies ({self.pi0}, {self.pi1})")

    @classmethod
    def from_pi1(cls, pi1: float) -> "BinaryCTMC":
        return cls(1.0 - pi1, pi1)

    @property
    def pi(self) -> np.ndarray:
        return np.array([self.pi0, self.pi1])

    @property
    def mu(self) -> float:
        return 1.0 / (2.0 * self.pi0 * self.pi1)

    def rate_matrix(self) -> np.ndarray:
        return self.mu * np.array([[-self.pi1, self.pi1], [self.pi0, -self.pi0]])


def transition_matrix(model: BinaryCTMC, t: float, r: float = 1.0) -> np.ndarray:
    if t < 0 or r < 0:
        raise DomainError("branch length and rate must be non-negative")
    e = np.exp(-model.mu * r * t)
    p0, p1 = model.pi0, model.pi1
    return np.array([[p0 + p1 * e, p1 * (1 - e)], [p0 * (1 - e), p1 + p0 * e]])


@dataclass(frozen=True)
class GammaRates:
    alpha: float
    rates: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.rates)

    @property
    def weights(self) -> tuple[float, ...]:
        return (1.0 / self.k,) * self.k

    @classmethod
    def uniform(cls) -> "GammaRates":
        """A single rate category (no among-character heterogeneity)."""
        return cls(float("inf"), (1.0,))


def discretize_gamma(alpha: float, k: int = 4) -> GammaRates:
    """Equal-probability categories of Gamma(alpha, 1/alpha); each rate is the category mean."""
    if not alpha > 0:
        raise DomainError(f"gamma shape must be positive, got {alpha}")
    if k < 1:
        raise DomainError("need at least one rate category")
    if k == 1:
        return GammaRates(float(alpha), (1.0,))
    cuts = stats.gamma.ppf(np.arange(1, k) / k, alpha, scale=1.0 / alpha)
    # E[X; X < c] for X ~ Gamma(alpha, rate alpha) is P(Gamma(alpha + 1) < alpha * c)
    cdf = np.concatenate([[0.0], special.gammainc(alpha + 1.0, cuts * alpha), [1.0]])
    rates = k * np.diff(cdf)
    rates = rates / rates.mean()
    return GammaRates(float(alpha), tuple(float(x) for x in rates))
