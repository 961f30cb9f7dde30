"""Forward Bayesian model of event-duration prediction.

A prior over total durations is a discrete pmf built from Poisson draws.
Observing that an event has lasted ``t_past`` truncates the prior to
``t_total >= t_past`` and reweights each surviving duration by
``(1 / t_total) ** n``; the prediction is the median (or mean) of the
resulting posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

# cumulative sums of renormalised masses can land a few ulps short of 0.5
_CDF_SLACK = 1e-12


class DecisionRule(str, Enum):
    MEDIAN = "median"
    MEAN = "mean"


class EmptyPosteriorError(ValueError):
    """No prior mass survives truncation at ``t_past``."""


def discrete_median(values: np.ndarray, probs: np.ndarray) -> float:
    """Smallest support value whose cumulative mass reaches 0.5."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, 0.5 - _CDF_SLACK * cdf[-1], side="left"))
    return float(values[min(idx, len(values) - 1)])


@dataclass(frozen=True)
class SampledPrior:
    """Empirical pmf over non-negative integer durations.

    ``values`` is sorted and unique; ``probs[i]`` is the fraction of draws
    equal to ``values[i]``. Priors built with :meth:`from_pmf` carry no
    sampling provenance (``sample_count`` and ``seed`` are ``None``).
    """

    lam: float
    values: np.ndarray
    probs: np.ndarray
    sample_count: int | None = None
    seed: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        probs = np.asarray(self.probs, dtype=float)
        if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
            raise ValueError("values and probs must be equal-length, non-empty 1-d arrays")
        if np.any(np.diff(values) <= 0):
            raise ValueError("support values must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("durations must be non-negative")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")
        values.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_draws(cls, draws, lam: float, seed: int | None = None) -> SampledPrior:
        draws = np.asarray(draws)
        values, counts = np.unique(draws, return_counts=True)
        return cls(lam=float(lam), values=values, probs=counts / draws.size,
                   sample_count=int(draws.size), seed=seed)

    @classmethod
    def from_pmf(cls, pmf: Mapping[float, float]) -> SampledPrior:
        """Prior from an explicit ``{duration: probability}`` mapping."""
        items = sorted((k, v) for k, v in pmf.items() if v > 0)
        values = np.array([k for k, _ in items])
        probs = np.array([v for _, v in items], dtype=float)
        probs = probs / probs.sum()
        return cls(lam=float(np.dot(values, probs)), values=values, probs=probs)

    @property
    def pmf(self) -> dict[float, float]:
        return {v.item(): float(p) for v, p in zip(self.values, self.probs)}

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def median(self) -> float:
        return discrete_median(self.values, self.probs)


@dataclass(frozen=True)
class LikelihoodSpec:
    t_past: float
    n_observations: int = 1

    def __post_init__(self):
        if not self.t_past >= 0:
            raise ValueError(f"t_past must be >= 0, got {self.t_past}")
        if int(self.n_observations) != self.n_observations or self.n_observations < 1:
            raise ValueError(f"n_observations must be a positive integer, got {self.n_observations}")


@dataclass(frozen=True)
class PosteriorResult:
    values: np.ndarray
    probs: np.ndarray
    median: float
    mean: float
    decision_rule_used: DecisionRule = DecisionRule.MEDIAN
    t_past: float = field(default=0.0, compare=False)

    @property
    def pmf(self) -> dict[float, float]:
        return {v.item(): float(p) for v, p in zip(self.values, self.probs)}

    @property
    def prediction(self) -> float:
        if self.decision_rule_used is DecisionRule.MEAN:
            return self.mean
        return self.median


def sample_poisson_prior(lam: float, sample_count: int, seed: int) -> SampledPrior:
    """Draw ``sample_count`` Poisson(``lam``) durations and tabulate their pmf.

    Args:
        lam: Expected duration, > 0.
        sample_count: Number of independent draws, >= 1.
        seed: Seed for ``numpy.random.default_rng``; fixes the draws exactly.

    Returns:
        SampledPrior whose support is exactly the set of values drawn.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if int(sample_count) != sample_count or sample_count < 1:
        raise ValueError(f"sample_count must be a positive integer, got {sample_count}")
    draws = np.random.default_rng(seed).poisson(lam, int(sample_count))
    return SampledPrior.from_draws(draws, lam=lam, seed=seed)


def posterior(prior: SampledPrior, likelihood: LikelihoodSpec,
              decision_rule: DecisionRule | str = DecisionRule.MEDIAN) -> PosteriorResult:
    """Truncate ``prior`` at ``t_past``, reweight by ``t_total ** -n`` and renormalise.

    A duration of zero carries no likelihood: an event that has not lasted
    at all cannot have a positive elapsed time, and ``1/0`` is undefined.

    Raises:
        EmptyPosteriorError: if no prior mass lies at or above ``t_past``.
    """
    rule = DecisionRule(decision_rule)
    values = prior.values
    keep = (values >= likelihood.t_past) & (values > 0)
    if not np.any(keep):
        raise EmptyPosteriorError(
            f"no prior support at or above t_past={likelihood.t_past} "
            f"(max support {values.max()})")
    support = values[keep]
    weights = prior.probs[keep] * np.power(support.astype(float), -float(likelihood.n_observations))
    total = weights.sum()
    if not total > 0:
        raise EmptyPosteriorError(f"posterior mass vanished at t_past={likelihood.t_past}")
    probs = weights / total
    return PosteriorResult(
        values=support,
        probs=probs,
        median=discrete_median(support, probs),
        mean=float(np.dot(support, probs)),
        decision_rule_used=rule,
        t_past=likelihood.t_past,
    )


def predict(prior: SampledPrior, t_past: float, n_observations: int = 1,
            decision_rule: DecisionRule | str = DecisionRule.MEDIAN) -> float:
    """Model prediction of total duration given the elapsed ``t_past``."""
    post = posterior(prior, LikelihoodSpec(t_past, n_observations), decision_rule)
    return post.prediction
