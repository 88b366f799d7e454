"""Average file download delay and speedup over BS-only delivery."""

from __future__ import annotations

from dataclasses import dataclass, field

from .composition import RequestSnapshot
from .d2d import D2DOutcomeDistribution, clamp_probability, outcome_distribution
from .kernels import TruncationPolicy
from .params import CodeParams, SystemParams
from .popularity import PopularityModel

SMALL_LOAD_LIMIT = 0.1


def idle_probability(omega: float, M_c: float, p_hit: float, tbar_eta: float) -> float:
    """P(D2D channel idle at a request) = 1 / (1 + omega M_c p_hit Tbar_eta).

    Accurate while ``omega * M_c * tbar_eta`` is small; see :func:`small_load`.
    """
    if min(omega, M_c, p_hit, tbar_eta) < 0:
        raise ValueError("inputs must be nonnegative")
    return 1.0 / (1.0 + omega * M_c * p_hit * tbar_eta)


def small_load(omega: float, M_c: float, tbar_eta: float) -> bool:
    return omega * M_c * tbar_eta <= SMALL_LOAD_LIMIT


def average_download_delay(p_hit: float, p_idle: float, tbar_eta: float, eta: float,
                           p_s: float, k: int, t_bs: float) -> float:
    """Mean time to obtain a file.

    Misses go to the BS for all ``k`` symbols. Hits with an idle channel spend
    ``tbar_eta`` on D2D and fetch the ``k - p_s - eta`` missing symbols from the
    BS; hits with a busy channel fetch ``k - p_s``.
    """
    miss = (1.0 - p_hit) * k * t_bs
    if p_hit == 0.0:
        return miss
    idle = p_idle * p_hit * (tbar_eta + (k - p_s - eta) * t_bs)
    busy = (1.0 - p_idle) * p_hit * (k - p_s) * t_bs
    return miss + idle + busy


def speedup(tbar_dw: float, k: int, t_bs: float) -> float:
    if tbar_dw <= 0:
        raise ValueError("delay must be positive")
    return k * t_bs / tbar_dw


@dataclass(frozen=True, eq=False)
class DelayBreakdown:
    params: SystemParams
    code: CodeParams
    p_hit: float
    p_idle: float
    tbar_eta: float
    eta: float
    p_s: float
    tbar_dw: float
    t_ref: float
    speedup: float
    small_load: bool
    d2d: D2DOutcomeDistribution | None = field(default=None, repr=False)

    def row(self) -> dict[str, float]:
        return {"p_hit": self.p_hit, "p_R1": self.p_s, "p_idle": self.p_idle,
                "eta": self.eta, "Tbar_eta": self.tbar_eta, "Tbar_dw": self.tbar_dw,
                "speedup": self.speedup}


def evaluate(params: SystemParams, code: CodeParams, popularity: PopularityModel | None = None,
             policy: TruncationPolicy = TruncationPolicy(),
             snapshot: RequestSnapshot | None = None) -> DelayBreakdown:
    """Run the full analytical pipeline for one parameter point.

    ``popularity=None`` means the whole library is cached (hit probability 1).
    A precomputed ``snapshot`` for the same churn parameters may be passed in;
    it does not depend on the code, ``t_d`` or ``t_bs``.
    """
    p_hit = 1.0 if popularity is None else popularity.hit_probability()
    dist = outcome_distribution(params, code, policy, snapshot)
    p_idle = clamp_probability(idle_probability(params.omega, params.M_c, p_hit, dist.tbar_eta),
                               "P(I=1)")
    tbar_dw = average_download_delay(p_hit, p_idle, dist.tbar_eta, dist.eta, dist.p_s,
                                     code.k, params.t_bs)
    t_ref = code.k * params.t_bs
    return DelayBreakdown(params=params, code=code, p_hit=p_hit, p_idle=p_idle,
                          tbar_eta=dist.tbar_eta, eta=dist.eta, p_s=dist.p_s,
                          tbar_dw=tbar_dw, t_ref=t_ref, speedup=speedup(tbar_dw, code.k, params.t_bs),
                          small_load=small_load(params.omega, params.M_c, dist.tbar_eta), d2d=dist)
