"""Poisson / pure-death probability kernels shared by the analytical model.

Production paths use binomial closed forms (log-gamma) and adaptive quadrature.
The ``*_series`` variants evaluate the alternating product-sum forms and exist
only as independent references for the tests; they lose accuracy quickly as the
population grows (see their docstrings).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.special import gammaln

QUAD_EPSABS = 1e-10


class TruncationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class TruncationPolicy:
    """Where to cut an infinite Poisson-weighted series.

    A series over a population with mean ``rho`` runs from 0 to the smallest
    ``t > rho`` whose stationary probability drops below ``epsilon``.
    """

    epsilon: float = 1e-5
    hard_cap: int = 512

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.hard_cap <= 0:
            raise ValueError("hard_cap must be positive")


@dataclass(frozen=True)
class DeathProcessKernel:
    """Independent exponential(mu) lifetimes observed over a fixed window."""

    mu: float
    window: float

    def __post_init__(self) -> None:
        if self.mu < 0 or self.window < 0:
            raise ValueError("mu and window must be nonnegative")

    @property
    def p_depart(self) -> float:
        return -math.expm1(-self.mu * self.window)

    @property
    def p_stay(self) -> float:
        return math.exp(-self.mu * self.window)


def log_poisson_pmf(m, rho):
    m = np.asarray(m, dtype=float)
    if rho == 0:
        return np.where(m == 0, 0.0, -np.inf)
    return m * math.log(rho) - rho - gammaln(m + 1)


def poisson_pmf(m, rho: float):
    """Stationary law of an M/M/inf population with mean ``rho``: rho^m e^-rho / m!.

    Accepts scalar or array ``m``; evaluated in the log domain.
    """
    if rho < 0 or np.any(np.asarray(m) < 0):
        raise ValueError("poisson_pmf needs m >= 0 and rho >= 0")
    out = np.exp(log_poisson_pmf(m, rho))
    return float(out) if np.ndim(out) == 0 else out


def truncation_index(rho: float, policy: TruncationPolicy = TruncationPolicy()) -> int:
    if rho < 0:
        raise ValueError("rho must be >= 0")
    t = math.floor(rho) + 1
    log_eps = math.log(policy.epsilon)
    while t < policy.hard_cap:
        if log_poisson_pmf(t, rho) < log_eps:
            return t
        t += 1
    warnings.warn(f"truncation threshold not met below hard_cap={policy.hard_cap} "
                  f"for rho={rho}", TruncationWarning, stacklevel=2)
    return policy.hard_cap


def _log_binom(n, k):
    return gammaln(np.asarray(n, float) + 1) - gammaln(np.asarray(k, float) + 1) \
        - gammaln(np.asarray(n, float) - np.asarray(k, float) + 1)


def departure_count_pmf(d: int, g: int, kernel: DeathProcessKernel) -> float:
    """P(exactly d of g live nodes leave within the kernel window); 0 if d > g."""
    if d < 0 or g < 0:
        raise ValueError("d and g must be nonnegative")
    if d > g:
        return 0.0
    return float(departure_count_matrix(g, kernel)[g, d])


def departure_count_matrix(g_max: int, kernel: DeathProcessKernel) -> np.ndarray:
    """Table ``theta[g, d]`` for 0 <= d <= g <= g_max (zero above the diagonal)."""
    g = np.arange(g_max + 1)[:, None]
    d = np.arange(g_max + 1)[None, :]
    mw = kernel.mu * kernel.window
    with np.errstate(divide="ignore", invalid="ignore"):
        # log(1 - e^{-mw}) and -(g-d) mw; 0*log(0) handled by the masks below
        log_dep = math.log(-math.expm1(-mw)) if mw > 0 else -np.inf
        logp = _log_binom(g, np.minimum(d, g)) + np.where(d > 0, d * log_dep, 0.0) \
            - (g - d) * mw
    out = np.exp(np.where(d <= g, logp, -np.inf))
    return np.nan_to_num(out, nan=0.0)


def departure_count_pmf_series(d: int, g: int, kernel: DeathProcessKernel) -> float:
    """Alternating product-sum form of :func:`departure_count_pmf`.

    The first sum is P(at least g-d survivors), the second P(at least g-d+1).
    Cancellation in the j/(j-i') products makes this unreliable beyond g ~ 20.
    """
    if d > g:
        return 0.0

    def at_least(s: int) -> float:
        total = 0.0
        for ip in range(s, g + 1):
            prod = 1.0
            for j in range(s, g + 1):
                if j != ip:
                    prod *= j / (j - ip)
            total += math.exp(-ip * kernel.mu * kernel.window) * prod
        return total

    return at_least(g - d) - at_least(g - d + 1)


def windowed_survivors_pmf(x: int, y: int, mu: float, delta: float) -> float:
    """P(x of y nodes present at an update are still there at a request in the interval).

    The request epoch is uniform on [0, delta]; survival is binomial with
    probability e^{-mu t}. Integrated with adaptive quadrature.
    """
    if x < 0 or y < 0 or delta <= 0:
        raise ValueError("need x, y >= 0 and delta > 0")
    if x > y:
        return 0.0
    lc = float(_log_binom(y, x))

    def f(t: float) -> float:
        if t == 0:
            return 1.0 if x == y else 0.0
        stay = -mu * t
        dep = math.log(-math.expm1(stay))
        return math.exp(lc + x * stay + (y - x) * dep)

    val, _ = quad(f, 0.0, delta, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200)
    return val / delta


def windowed_survivors_matrix(y_max: int, mu: float, delta: float) -> np.ndarray:
    """Table ``K[y, x] = P(X=x | Y=y)`` for 0 <= x <= y <= y_max, one vector quadrature."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    y = np.arange(y_max + 1)[:, None]
    x = np.arange(y_max + 1)[None, :]
    lower = x <= y
    lc = np.where(lower, _log_binom(y, np.minimum(x, y)), -np.inf)
    diag = (x == y)

    def f(t: float) -> np.ndarray:
        if t == 0:
            return diag.astype(float)
        stay = -mu * t
        dep = math.log(-math.expm1(stay))
        with np.errstate(invalid="ignore"):
            v = np.exp(lc + x * stay + (y - x) * dep)
        return np.where(lower, v, 0.0)

    val, _ = quad_vec(f, 0.0, delta, epsabs=QUAD_EPSABS, epsrel=1e-12)
    return val / delta


def windowed_survivors_pmf_series(x: int, y: int, mu: float, delta: float) -> float:
    """Alternating product-sum form of :func:`windowed_survivors_pmf`.

    Cancellation limits it: the error against the quadrature is about 3e-8 at
    y = 20 and passes 1e-7 between y = 23 and 26 (Delta from 0.1 to 5), growing
    quickly after that. Kept as a test oracle only.
    """
    if x > y:
        return 0.0

    def mean_at_least(s: int) -> float:
        total = 0.0
        for ip in range(s, y + 1):
            prod = 1.0
            for j in range(s, y + 1):
                if j != ip:
                    prod *= j / (j - ip)
            # (1 - e^{-ip mu delta}) / (ip mu), with the ip = 0 limit delta
            w = delta if ip == 0 else -math.expm1(-ip * mu * delta) / (ip * mu)
            total += w * prod
        return total

    return (mean_at_least(x) - mean_at_least(x + 1)) / delta


def request_in_interval_prob(omega: float, delta: float, M_c: float,
                             policy: TruncationPolicy = TruncationPolicy()) -> float:
    """P(at least one request during an update interval of length ``delta``)."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    t = truncation_index(M_c, policy)
    m = np.arange(1, t + 1)
    return float(np.sum(-np.expm1(-m * omega * delta) * poisson_pmf(m, M_c)))
