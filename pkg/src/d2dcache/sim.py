"""Discrete-event simulation of one cluster with periodic DS-list broadcasts.

Nodes arrive as Poisson processes (storage at ``n_c * lambda``, regular at
``(M_c - n_c) * lambda``) and stay for exponential(mu) lifetimes. Every node
issues requests at rate ``omega`` while present. Because lifetimes and request
epochs of different nodes are independent, each replication first draws the
whole node history with numpy and then walks the requests in time order,
tracking the broadcast list and the single D2D channel.

Randomness is split into named Philox streams per replication so that
changing one parameter (say the update interval) keeps the churn path fixed.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .d2d import D2DOutcomeDistribution
from .delay import DelayBreakdown
from .params import CodeParams, ConfigError, SystemParams, validate
from .popularity import PopularityModel

STREAMS = ("arrivals", "departures", "requests", "ranks", "choices")
TRACE_COLUMNS = ("replication", "time", "file_rank", "hit", "idle", "R", "attempts",
                 "symbols_d2d", "symbols_bs", "delay")


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    code: CodeParams
    popularity: PopularityModel | None = None
    seed: int = 0
    warmup_requests: int = 2000
    warmup_time: float | None = None  # default 10 M_c / lambda
    measured_requests: int = 100_000
    replications: int = 10

    def __post_init__(self) -> None:
        report = validate(self.params, None)
        if not report.ok:
            raise ConfigError("; ".join(report.failures))
        if not 1 <= self.code.k <= self.code.n_code:
            raise ConfigError("need 1 <= k <= n_code")
        if self.measured_requests < 1 or self.replications < 1 or self.warmup_requests < 0:
            raise ConfigError("request and replication counts must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def warmup_until(self) -> float:
        if self.warmup_time is not None:
            return self.warmup_time
        return 10.0 * self.params.M_c / self.params.lambda_


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    @property
    def ci95(self) -> tuple[float, float]:
        return self.mean - 1.96 * self.se, self.mean + 1.96 * self.se

    def __format__(self, spec: str) -> str:
        return f"{format(self.mean, spec)} ± {format(self.se, spec)}"


def _estimate(values: list[float], fallback_se: float = math.nan) -> Estimate:
    arr = np.asarray(values, dtype=float)
    if arr.size > 1:
        return Estimate(float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size)))
    return Estimate(float(arr.mean()), fallback_se)


@dataclass
class ReplicationResult:
    """Raw tallies of one replication over its measured requests."""

    k: int
    requests: int = 0
    delay_sum: float = 0.0
    delay_sq_sum: float = 0.0
    idle: int = 0
    listed_requester: int = 0
    eligible: int = 0  # hit and idle
    symbols_d2d: int = 0
    x1_sum: int = 0
    hist: list[np.ndarray] = field(default_factory=list)
    mean_nodes: float = math.nan
    mean_storage_nodes: float = math.nan
    span: tuple[float, float] = (math.nan, math.nan)

    def __post_init__(self) -> None:
        if not self.hist:
            self.hist = [np.zeros(self.k - i + 1, dtype=np.int64) for i in (0, 1)]


@dataclass(frozen=True, eq=False)
class SimStats:
    config: SimConfig
    mean_delay: Estimate
    eta_hat: Estimate
    idle_fraction: Estimate
    list_request_fraction: Estimate
    mean_X1: Estimate
    outcome_counts: tuple[np.ndarray, np.ndarray]
    outcome_fractions: tuple[list[Estimate], list[Estimate]]
    mean_nodes: Estimate
    mean_storage_nodes: Estimate
    replications: tuple[ReplicationResult, ...] = field(repr=False)

    @property
    def eligible_requests(self) -> int:
        return sum(r.eligible for r in self.replications)

    @property
    def total_requests(self) -> int:
        return sum(r.requests for r in self.replications)


def _streams(seed: int, replication: int) -> dict[str, np.random.Generator]:
    root = np.random.SeedSequence(seed, spawn_key=(replication,))
    return {name: np.random.Generator(np.random.Philox(child))
            for name, child in zip(STREAMS, root.spawn(len(STREAMS)))}


class _History:
    """Arrival/departure times of one node class plus the requests they issue."""

    def __init__(self) -> None:
        self.arr: list[np.ndarray] = []
        self.dep: list[np.ndarray] = []
        self.req_t: list[np.ndarray] = []
        self.req_node: list[np.ndarray] = []
        self.count = 0

    def extend(self, rng: dict[str, np.random.Generator], rate: float, mean: float,
               mu: float, omega: float, t0: float, t1: float) -> None:
        if t0 == 0.0:
            n0 = rng["arrivals"].poisson(mean)
            arr = np.concatenate([np.zeros(n0),
                                  np.sort(rng["arrivals"].uniform(0.0, t1, rng["arrivals"].poisson(rate * t1)))])
        else:
            n = rng["arrivals"].poisson(rate * (t1 - t0))
            arr = np.sort(rng["arrivals"].uniform(t0, t1, n))
        dep = arr + rng["departures"].exponential(1.0 / mu, arr.size)
        life = dep - arr
        n_req = rng["requests"].poisson(omega * life)
        owner = np.repeat(np.arange(arr.size), n_req)
        t = arr[owner] + rng["requests"].uniform(size=owner.size) * life[owner]
        self.arr.append(arr)
        self.dep.append(dep)
        self.req_t.append(t)
        self.req_node.append(owner + self.count)
        self.count += arr.size

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        cat = np.concatenate
        return cat(self.arr), cat(self.dep), cat(self.req_t), cat(self.req_node)


def _time_average_population(arr: np.ndarray, dep: np.ndarray, t0: float, t1: float) -> float:
    overlap = np.clip(np.minimum(dep, t1) - np.maximum(arr, t0), 0.0, None)
    return float(overlap.sum() / (t1 - t0)) if t1 > t0 else math.nan


def run_replication(config: SimConfig, replication: int,
                    trace: csv.writer | None = None) -> ReplicationResult:
    p, k = config.params, config.code.k
    rng = _streams(config.seed, replication)
    storage, regular = _History(), _History()
    rate_req = max(p.omega * p.M_c, 1e-12)
    wanted = config.warmup_requests + config.measured_requests
    horizon = 0.0
    step = max((wanted + 6 * math.sqrt(wanted) + 20) / rate_req, config.warmup_until * 1.1)
    while True:
        t1 = horizon + step
        storage.extend(rng, p.n_c * p.lambda_, p.n_c, p.mu, p.omega, horizon, t1)
        regular.extend(rng, p.regular_mean * p.lambda_, p.regular_mean, p.mu, p.omega, horizon, t1)
        horizon = t1
        s_arr, s_dep, s_rt, s_rn = storage.arrays()
        r_arr, r_dep, r_rt, r_rn = regular.arrays()
        t = np.concatenate([s_rt, r_rt])
        who = np.concatenate([s_rn, -1 - r_rn])
        keep = t < horizon
        t, who = t[keep], who[keep]
        order = np.argsort(t, kind="stable")
        t, who = t[order], who[order]
        start = max(config.warmup_requests, int(np.searchsorted(t, config.warmup_until)))
        if t.size - start >= config.measured_requests:
            break
        step = max(step * 0.25, 10.0 / rate_req)
    stop = start + config.measured_requests
    t, who = t[:stop], who[:stop]

    pop = config.popularity
    if pop is None:
        ranks = np.ones(stop, dtype=np.int64)
        F = 1
    else:
        cdf = np.cumsum(pop.pmf)
        ranks = np.minimum(np.searchsorted(cdf, rng["ranks"].uniform(size=stop) * cdf[-1],
                                           side="right") + 1, pop.Z)
        F = pop.F
    picks = rng["choices"].uniform(size=(stop, k)).tolist()

    res = ReplicationResult(k=k)
    res.span = (float(t[start]), float(t[stop - 1]))
    res.mean_nodes = (_time_average_population(s_arr, s_dep, *res.span)
                      + _time_average_population(r_arr, r_dep, *res.span))
    res.mean_storage_nodes = _time_average_population(s_arr, s_dep, *res.span)

    _walk(config, t.tolist(), who.tolist(), ranks.tolist(), picks, F,
          s_arr.tolist(), s_dep.tolist(), r_dep.tolist(), start, res, replication, trace)
    return res


def _walk(config, times, who, ranks, picks, F, s_arr, s_dep, r_dep, start, res,
          replication, trace) -> None:
    p, k = config.params, config.code.k
    delta, t_d, t_bs = p.delta, p.t_d, p.t_bs
    instant = delta <= 0.0
    listed: dict[int, float] = {}  # storage node id -> departure time
    ptr, n_storage = 0, len(s_arr)
    last_broadcast = -math.inf
    broadcast: set[int] = set()
    busy_until = -math.inf
    hist = res.hist

    for q, W in enumerate(times):
        b = W if instant else math.floor(W / delta) * delta
        if b != last_broadcast:
            while ptr < n_storage and s_arr[ptr] <= b:
                if s_dep[ptr] > b:
                    listed[ptr] = s_dep[ptr]
                ptr += 1
            last_broadcast = b
            broadcast = set(n for n, dep in listed.items() if dep > b)
        if any(dep <= W for dep in listed.values()):
            listed = {n: dep for n, dep in listed.items() if dep > W}

        node = who[q]
        if node >= 0:
            R = 1 if node in listed else 0
            own_dep = s_dep[node]
        else:
            R = 0
            own_dep = r_dep[-1 - node]
        needed = k - R
        hit = ranks[q] <= F
        idle = W >= busy_until
        attempts = got = 0
        # the requester only sees the broadcast list: if it names nobody else, no
        # session is opened; departures since the broadcast are found the hard way
        opened = hit and idle and needed > 0 and len(broadcast) - (node in broadcast) > 0
        if opened:
            pool = [dep for n, dep in listed.items() if n != node]
            begin = W
            u = picks[q]
            while got < needed:
                attempts += 1
                end = begin + t_d
                alive = [i for i, dep in enumerate(pool) if dep > begin]
                if not alive:
                    break
                chosen = alive[int(u[attempts - 1] * len(alive))]
                ok = pool[chosen] > end and own_dep > end
                pool.pop(chosen)
                if not ok:
                    break
                got += 1
                begin = end
            busy_until = W + attempts * t_d
        from_bs = (needed - got) if hit else k
        delay = attempts * t_d + from_bs * t_bs

        if q < start:
            continue
        res.requests += 1
        res.delay_sum += delay
        res.delay_sq_sum += delay * delay
        res.idle += idle
        res.listed_requester += R
        res.x1_sum += len(listed)
        if hit and idle:
            res.eligible += 1
            res.symbols_d2d += got
            if needed > 0:
                hist[R][got] += 1
        if trace is not None:
            trace.writerow((replication, repr(W), ranks[q], int(hit), int(idle), R, attempts,
                            got, from_bs, repr(delay)))


def _replication_job(args: tuple[SimConfig, int]) -> ReplicationResult:
    return run_replication(*args)


def run(config: SimConfig, workers: int = 1, trace_path: str | Path | None = None) -> SimStats:
    """Simulate ``config.replications`` independent replications and pool them."""
    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            results = [run_replication(config, r, writer) for r in range(config.replications)]
    elif workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replication_job,
                                    [(config, r) for r in range(config.replications)]))
    else:
        results = [run_replication(config, r) for r in range(config.replications)]
    return aggregate(config, results)


def aggregate(config: SimConfig, results: list[ReplicationResult]) -> SimStats:
    """Pool replications; standard errors are taken across replications.

    With a single replication the errors fall back to i.i.d. formulas over requests.
    """
    n_tot = sum(r.requests for r in results)

    def frac_se(hits: int, n: int) -> float:
        if n == 0:
            return math.nan
        f = hits / n
        return math.sqrt(f * (1 - f) / n)

    def per_rep(num, den):
        return [num(r) / den(r) if den(r) else math.nan for r in results]

    mean_delay = _estimate(per_rep(lambda r: r.delay_sum, lambda r: r.requests),
                           _delay_se(results[0]) if len(results) == 1 else math.nan)
    eta_hat = _estimate(per_rep(lambda r: r.symbols_d2d, lambda r: r.eligible), math.nan)
    idle = _estimate(per_rep(lambda r: r.idle, lambda r: r.requests),
                     frac_se(sum(r.idle for r in results), n_tot))
    listed = _estimate(per_rep(lambda r: r.listed_requester, lambda r: r.requests),
                       frac_se(sum(r.listed_requester for r in results), n_tot))
    mean_x1 = _estimate(per_rep(lambda r: r.x1_sum, lambda r: r.requests))
    counts = tuple(sum(r.hist[i] for r in results) for i in (0, 1))
    fractions = []
    for i in (0, 1):
        bins = []
        total = int(counts[i].sum())
        for s in range(counts[i].size):
            vals = [r.hist[i][s] / r.hist[i].sum() for r in results if r.hist[i].sum()]
            fb = frac_se(int(counts[i][s]), total)
            bins.append(_estimate(vals, fb) if vals else Estimate(math.nan, math.nan))
        fractions.append(bins)
    nodes = _estimate([r.mean_nodes for r in results])
    storage = _estimate([r.mean_storage_nodes for r in results])
    return SimStats(config=config, mean_delay=mean_delay, eta_hat=eta_hat, idle_fraction=idle,
                    list_request_fraction=listed, mean_X1=mean_x1, outcome_counts=counts,
                    outcome_fractions=(fractions[0], fractions[1]), mean_nodes=nodes,
                    mean_storage_nodes=storage, replications=tuple(results))


def _delay_se(r: ReplicationResult) -> float:
    if r.requests < 2:
        return math.nan
    m = r.delay_sum / r.requests
    var = max(r.delay_sq_sum / r.requests - m * m, 0.0)
    return math.sqrt(var / r.requests)


@dataclass(frozen=True)
class ComparisonItem:
    name: str
    analytic: float
    simulated: float
    se: float
    rule: str  # "rel" (relative error bound) or "se" (standard-error multiple)
    bound: float
    gating: bool

    @property
    def rel_err(self) -> float:
        if self.analytic == 0:
            return 0.0 if self.simulated == 0 else math.inf
        return (self.simulated - self.analytic) / self.analytic

    @property
    def n_se(self) -> float:
        diff = abs(self.simulated - self.analytic)
        if diff == 0:
            return 0.0
        return diff / self.se if self.se > 0 else math.inf

    @property
    def passed(self) -> bool:
        if self.rule == "rel":
            return abs(self.rel_err) <= self.bound
        return self.n_se <= self.bound


@dataclass(frozen=True)
class ComparisonReport:
    items: tuple[ComparisonItem, ...]

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items if it.gating)

    def failures(self) -> list[ComparisonItem]:
        return [it for it in self.items if it.gating and not it.passed]

    def get(self, name: str) -> ComparisonItem:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)


DELAY_REL_TOL = 0.05
PROB_SE_TOL = 3.0


def compare(stats: SimStats, analytic: DelayBreakdown,
            dist: D2DOutcomeDistribution | None = None) -> ComparisonReport:
    """Line up simulator estimates with the analytical model at one parameter point.

    Gating checks: mean delay within 5 % and every outcome-histogram bin within
    3 standard errors. Request-type fraction, idle fraction, D2D symbols and
    listed-node mean are reported alongside but do not gate.
    """
    cfg = stats.config
    if cfg.params != analytic.params or cfg.code != analytic.code:
        raise ValueError("simulation and analytical results are for different parameter points")
    if dist is None:
        dist = analytic.d2d
    items = [ComparisonItem("mean_delay", analytic.tbar_dw, stats.mean_delay.mean,
                            stats.mean_delay.se, "rel", DELAY_REL_TOL, True)]
    if dist is not None:
        for i in (0, 1):
            outcome = dist.by_type[i]
            if not outcome.weighted or cfg.code.k - i <= 0:
                continue
            n_i = int(stats.outcome_counts[i].sum())
            if n_i == 0:
                continue
            for s, (p_an, est) in enumerate(zip(outcome.histogram(), stats.outcome_fractions[i])):
                se = est.se
                if not se > 0:
                    # every replication identical (e.g. an empty bin): binomial error at the model value
                    se = math.sqrt(max(p_an * (1 - p_an), 1.0 / n_i) / n_i)
                items.append(ComparisonItem(f"outcome[R={i}][{s}]", float(p_an), est.mean, se,
                                            "se", PROB_SE_TOL, True))
        items.append(ComparisonItem("mean_X1", dist.snapshot.mean_X1, stats.mean_X1.mean,
                                    stats.mean_X1.se, "se", PROB_SE_TOL, False))
    items += [
        ComparisonItem("p_R1", analytic.p_s, stats.list_request_fraction.mean,
                       stats.list_request_fraction.se, "se", PROB_SE_TOL, False),
        ComparisonItem("p_idle", analytic.p_idle, stats.idle_fraction.mean,
                       stats.idle_fraction.se, "rel", DELAY_REL_TOL, False),
        ComparisonItem("eta", analytic.eta, stats.eta_hat.mean, stats.eta_hat.se,
                       "rel", DELAY_REL_TOL, False),
    ]
    return ComparisonReport(tuple(items))
