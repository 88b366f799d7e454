"""Serial D2D download: outcome probabilities, mean symbols and mean channel time.

A requester contacts listed storage nodes one at a time. Each attempt takes
``t_d``; it succeeds if the chosen node and the requester both stay for the
whole attempt. The session stops at the first failed attempt or once the
``k - i`` needed symbols are in (``i = 1`` when the requester is itself listed).

``gamma_j(g, d)`` is the probability of reaching attempt ``j`` after ``j - 1``
successes with ``g`` usable nodes of which ``d`` leave during that attempt.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .composition import RequestSnapshot, request_snapshot
from .kernels import DeathProcessKernel, TruncationPolicy, departure_count_matrix
from .params import CodeParams, SystemParams

PROB_SLACK = 1e-9
PROB_HARD = 1e-6


class ProbabilityRangeWarning(RuntimeWarning):
    pass


def clamp_probability(value: float, what: str = "probability") -> float:
    """Clamp to [0, 1]; tolerate 1e-9 silently, warn up to 1e-6, raise beyond."""
    excess = max(-value, value - 1.0)
    if excess > PROB_HARD or math.isnan(value):
        raise ArithmeticError(f"{what} = {value!r} outside [0, 1]")
    if excess > PROB_SLACK:
        warnings.warn(f"{what} = {value!r} clamped to [0, 1]", ProbabilityRangeWarning,
                      stacklevel=2)
    return min(1.0, max(0.0, value))


@dataclass(frozen=True, eq=False)
class GammaTable:
    """Dense ``values[j, g, d]`` for attempts 1..depth; row ``j = 0`` is unused."""

    i: int
    values: np.ndarray

    @property
    def depth(self) -> int:
        return self.values.shape[0] - 1

    @property
    def g_max(self) -> int:
        return self.values.shape[1] - 1

    def __call__(self, j: int, g: int, d: int) -> float:
        if not 1 <= j <= self.depth or g < 0 or d < 0 or g > self.g_max or d > g:
            return 0.0
        return float(self.values[j, g, d])


def _useful_nodes(posterior: np.ndarray, i: int, g_max: int) -> np.ndarray:
    """P(G1 = g | R = i) = P(X1 = g + i | R = i) for g = 0..g_max."""
    out = np.zeros(g_max + 1)
    src = posterior[i:]
    n = min(src.size, g_max + 1)
    out[:n] = src[:n]
    return out


def build_gamma(snapshot: RequestSnapshot, kernel: DeathProcessKernel, k: int, i: int,
                policy: TruncationPolicy = TruncationPolicy(), g_max: int | None = None,
                depth: int | None = None) -> GammaTable:
    posterior = snapshot.px1_given_R[i]
    if posterior is None:
        raise ValueError(f"P(R={i}) = 0; no attempt chain to build")
    if g_max is None:
        g_max = posterior.size - 1 + k
    if depth is None:
        depth = max(k - i, 0)
    theta = departure_count_matrix(g_max, kernel)
    table = np.zeros((depth + 1, g_max + 1, g_max + 1))
    if depth == 0:
        return GammaTable(i, table)
    table[1] = _useful_nodes(posterior, i, g_max)[:, None] * theta

    # A success from (g', d') leaves g = g' - d' - 1 usable nodes, so for each
    # target g the feeding states are g' > g with d' = g' - g - 1.
    g = np.arange(g_max + 1)[:, None]
    gp = np.arange(g_max + 1)[None, :]
    feeds = gp > g
    dp = np.where(feeds, gp - g - 1, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(feeds, (g + 1) / gp, 0.0)
    for j in range(2, depth + 1):
        prev = table[j - 1]
        inflow = np.sum(ratio * prev[gp.repeat(g_max + 1, 0), dp], axis=1)
        table[j] = theta * inflow[:, None]
    return GammaTable(i, table)


def _fractions(g_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(d/g, (g-d)/g) over the [g, d] grid, zero on the g = 0 row and above d = g."""
    g = np.arange(g_max + 1)[:, None]
    d = np.arange(g_max + 1)[None, :]
    valid = (g > 0) & (d <= g)
    with np.errstate(divide="ignore", invalid="ignore"):
        leave = np.where(valid, d / g, 0.0)
        stay = np.where(valid, (g - d) / g, 0.0)
    return leave, stay


def first_attempt_failure(snapshot: RequestSnapshot, kernel: DeathProcessKernel, i: int,
                          g_max: int | None = None) -> float:
    """P(no symbol at all via D2D | R = i)."""
    posterior = snapshot.px1_given_R[i]
    if posterior is None:
        raise ValueError(f"P(R={i}) = 0")
    if g_max is None:
        g_max = posterior.size - 1
    useful = _useful_nodes(posterior, i, g_max)
    theta = departure_count_matrix(g_max, kernel)
    leave, _ = _fractions(g_max)
    chose_leaver = np.sum(leave * useful[:, None] * theta)
    value = 1.0 + kernel.p_stay * (useful[0] + chose_leaver - 1.0)
    return clamp_probability(value, f"P(S1=0|R={i})")


def full_recovery(table: GammaTable, kernel: DeathProcessKernel, k: int, i: int) -> float:
    needed = k - i
    if needed <= 0:
        return 1.0
    _, stay = _fractions(table.g_max)
    value = math.exp(-needed * kernel.mu * kernel.window) * np.sum(stay * table.values[needed])
    return clamp_probability(float(value), f"P(full|R={i})")


def partial_recovery(table: GammaTable, kernel: DeathProcessKernel, j: int, k: int,
                     i: int) -> float:
    """P(exactly j symbols, then a failed attempt | R = i), 1 <= j <= k - 1 - i."""
    if not 1 <= j <= k - 1 - i:
        return 0.0
    mt = kernel.mu * kernel.window
    a = math.exp(-(j + 1) * mt)
    b = math.exp(-j * mt) * -math.expm1(-mt)
    leave, stay = _fractions(table.g_max)
    nxt, cur = table.values[j + 1], table.values[j]
    value = nxt[0, 0] * a + np.sum(leave * nxt) * a + np.sum(stay * cur) * b
    return clamp_probability(float(value), f"P(partial {j}|R={i})")


def aggregate(p_fail_first: float, p_partial, p_full: float, k: int, i: int,
              t_d: float) -> tuple[float, float]:
    """Mean D2D symbols and mean D2D channel time for request type ``i``.

    A full download costs ``k - i`` attempts, a partial one of ``j`` symbols
    ``j + 1`` attempts, and a failure at the first attempt a single attempt.
    """
    needed = k - i
    if needed <= 0:
        return 0.0, 0.0
    p_partial = np.asarray(p_partial, dtype=float)
    j = np.arange(1, p_partial.size + 1)
    eta = needed * p_full + float(np.dot(j, p_partial))
    attempts = eta + p_fail_first + float(p_partial.sum())
    return eta, t_d * attempts


def combine(eta_0: float, tbar_0: float, eta_1: float, tbar_1: float,
            p_s: float) -> tuple[float, float]:
    if not 0.0 <= p_s <= 1.0:
        raise ValueError("p_s must be in [0, 1]")
    if p_s == 0.0:
        return eta_0, tbar_0
    if p_s == 1.0:
        return eta_1, tbar_1
    return eta_1 * p_s + eta_0 * (1 - p_s), tbar_1 * p_s + tbar_0 * (1 - p_s)


@dataclass(frozen=True, eq=False)
class TypeOutcome:
    p_fail_first: float
    p_partial: np.ndarray  # index j - 1 for j = 1..k-1-i
    p_full: float
    eta: float
    tbar: float
    weighted: bool = True  # False when P(R = i) = 0 and the fields are placeholders

    @property
    def total(self) -> float:
        return self.p_fail_first + float(self.p_partial.sum()) + self.p_full

    def histogram(self) -> np.ndarray:
        """Probabilities of obtaining 0, 1, ..., k - i symbols."""
        return np.concatenate([[self.p_fail_first], self.p_partial, [self.p_full]])


@dataclass(frozen=True, eq=False)
class D2DOutcomeDistribution:
    by_type: tuple[TypeOutcome, TypeOutcome]
    eta: float
    tbar_eta: float
    p_s: float
    snapshot: RequestSnapshot = field(repr=False)


def type_outcome(snapshot: RequestSnapshot, kernel: DeathProcessKernel, k: int, i: int,
                 policy: TruncationPolicy = TruncationPolicy()) -> TypeOutcome:
    needed = k - i
    if snapshot.px1_given_R[i] is None:
        return TypeOutcome(0.0, np.zeros(max(needed - 1, 0)), 0.0, 0.0, 0.0, weighted=False)
    if needed <= 0:
        return TypeOutcome(0.0, np.zeros(0), 1.0, 0.0, 0.0)
    g_max = snapshot.px1.size - 1 + k
    table = build_gamma(snapshot, kernel, k, i, policy, g_max=g_max)
    p_fail = first_attempt_failure(snapshot, kernel, i, g_max=g_max)
    p_full = full_recovery(table, kernel, k, i)
    p_part = np.array([partial_recovery(table, kernel, j, k, i) for j in range(1, needed)])
    eta, tbar = aggregate(p_fail, p_part, p_full, k, i, kernel.window)
    return TypeOutcome(p_fail, p_part, p_full, eta, tbar)


def outcome_distribution(params: SystemParams, code: CodeParams,
                         policy: TruncationPolicy = TruncationPolicy(),
                         snapshot: RequestSnapshot | None = None) -> D2DOutcomeDistribution:
    if snapshot is None:
        snapshot = request_snapshot(params, policy)
    kernel = DeathProcessKernel(params.mu, params.t_d)
    outcomes = tuple(type_outcome(snapshot, kernel, code.k, i, policy) for i in (0, 1))
    p_s = clamp_probability(snapshot.p_R1, "P(R=1)")
    eta, tbar = combine(outcomes[0].eta, outcomes[0].tbar, outcomes[1].eta, outcomes[1].tbar, p_s)
    return D2DOutcomeDistribution(outcomes, eta, tbar, p_s, snapshot)
