"""Zipf request popularity over a finite library and the resulting cache-hit rate."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PopularityModel:
    Z: int
    sigma: float = 0.0
    F: int | None = None  # None caches the whole library

    def __post_init__(self) -> None:
        if self.Z < 1:
            raise ValueError("library size Z must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.F is None:
            object.__setattr__(self, "F", self.Z)
        if not 0 <= self.F <= self.Z:
            raise ValueError(f"need 0 <= F <= Z (F={self.F}, Z={self.Z})")

    @cached_property
    def pmf(self) -> np.ndarray:
        """Request probabilities of ranks 1..Z (index 0 is rank 1)."""
        w = np.arange(1, self.Z + 1, dtype=float) ** -self.sigma
        # ascending magnitude summation
        return w / np.sum(w[::-1])

    def zipf_pmf(self, i: int) -> float:
        if not 1 <= i <= self.Z:
            raise ValueError(f"rank {i} outside 1..{self.Z}")
        return float(self.pmf[i - 1])

    def hit_probability(self) -> float:
        if self.F == self.Z:
            return 1.0
        return float(np.sum(self.pmf[: self.F][::-1]))


def zipf_pmf(i: int, model: PopularityModel) -> float:
    return model.zipf_pmf(i)


def hit_probability(model: PopularityModel) -> float:
    """Probability that a request targets one of the F most popular (cached) files."""
    return model.hit_probability()
