"""Bootstrap scores, pairwise rank probabilities, Brier loss and Cohen's kappa."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np

from plotnode.errors import (
    EmptyInput,
    LengthMismatch,
    SampleLengthMismatch,
    ZeroVariance,
)

DEFAULT_BOOTSTRAP_B = 1000
_SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via the C library erf (odd, so cdf(x) + cdf(-x) == 1)."""
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


@dataclass(frozen=True)
class BootstrapStats:
    mean: float
    variance: float
    samples: np.ndarray = field(repr=False)
    B: int
    seed: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance, "B": self.B, "seed": self.seed}


def bootstrap_scores(scores: Sequence[float], B: int = DEFAULT_BOOTSTRAP_B, *, seed: int) -> BootstrapStats:
    """Means of ``B`` resamples (with replacement) of ``scores``.

    Variance is the population variance of the replicate means. The
    resampling indices come from ``numpy.random.default_rng(seed)``.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    data = np.asarray(scores, dtype=float)
    if data.ndim != 1 or data.size == 0:
        raise EmptyInput("bootstrap needs a non-empty 1-d score list")
    rng = np.random.default_rng(seed)
    n = data.size
    chunk = max(1, 2_000_000 // n)
    parts = []
    done = 0
    while done < B:
        size = min(chunk, B - done)
        idx = rng.integers(0, n, size=(size, n))
        parts.append(data[idx].mean(axis=1))
        done += size
    samples = np.concatenate(parts)
    if np.all(data == data[0]):
        # exact for degenerate input; float summation can drift by an ulp
        samples = np.full(B, data[0])
        return BootstrapStats(float(data[0]), 0.0, samples, B, seed)
    return BootstrapStats(float(samples.mean()), float(samples.var()), samples, B, seed)


def pairwise_probability(stats_i: BootstrapStats, stats_j: BootstrapStats, mode: str = "normal") -> float:
    """Probability that model i scores below model j."""
    if mode == "normal":
        var = stats_i.variance + stats_j.variance
        if not var > 0:
            raise ZeroVariance("normal mode needs a positive combined variance")
        return normal_cdf((stats_j.mean - stats_i.mean) / math.sqrt(var))
    if mode == "empirical":
        a, b = np.asarray(stats_i.samples), np.asarray(stats_j.samples)
        if a.size == 0 or a.shape != b.shape:
            raise SampleLengthMismatch(f"replicate counts differ: {a.size} vs {b.size}")
        return float(np.count_nonzero(a < b)) / a.size
    raise ValueError(f"unknown mode {mode!r}")


def brier_loss(probabilities: Sequence[float], outcomes: Sequence[int]) -> float:
    if len(probabilities) != len(outcomes):
        raise LengthMismatch(f"{len(probabilities)} probabilities vs {len(outcomes)} outcomes")
    if not probabilities:
        raise EmptyInput("brier_loss needs at least one pair")
    total = 0.0
    for p, o in zip(probabilities, outcomes):
        if o not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {o!r}")
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability out of range: {p!r}")
        total += (p - o) ** 2
    return total / len(probabilities)


@dataclass(frozen=True)
class KappaInput:
    labels_a: Sequence[Hashable]
    labels_b: Sequence[Hashable]

    def __post_init__(self) -> None:
        if len(self.labels_a) != len(self.labels_b):
            raise LengthMismatch(f"{len(self.labels_a)} vs {len(self.labels_b)} labels")
        if not self.labels_a:
            raise EmptyInput("kappa needs at least one labelled item")


def cohen_kappa(data: KappaInput | tuple[Sequence[Hashable], Sequence[Hashable]]) -> float:
    """Chance-corrected agreement between two annotators.

    Computed in exact rational arithmetic. Total agreement on a single label
    (expected agreement 1) returns 1.0.
    """
    if not isinstance(data, KappaInput):
        data = KappaInput(*data)
    n = len(data.labels_a)
    observed = Fraction(sum(a == b for a, b in zip(data.labels_a, data.labels_b)), n)
    ca, cb = Counter(data.labels_a), Counter(data.labels_b)
    expected = sum(Fraction(ca[k] * cb[k], n * n) for k in ca.keys() & cb.keys())
    if expected == 1:
        return 1.0
    return float((observed - expected) / (1 - expected))
