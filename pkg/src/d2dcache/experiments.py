"""Parameter sweeps reproducing the speedup-vs-update-interval and speedup-vs-Zipf curves."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .composition import RequestSnapshot, request_snapshot
from .delay import DelayBreakdown, evaluate
from .kernels import TruncationPolicy
from .params import (CodeParams, ConfigError, StorageBudget, SystemParams,
                     cached_file_count, validate)
from .popularity import PopularityModel
from .sim import ComparisonReport, SimConfig, SimStats, compare, run

AXES = ("delta", "sigma", "code")
MB_BITS = 8e6
GB_BITS = 8e9
DEFAULT_CODES = ((1, 1), (3, 1), (6, 2), (15, 5))
# 4 significant digits keeps the endpoints exactly 0.05 and 5
DELTA_GRID = tuple(float(f"{v:.4g}") for v in np.logspace(math.log10(0.05), math.log10(5.0), 20))
SIGMA_GRID = tuple(round(0.2 * i, 10) for i in range(9))


@dataclass(frozen=True)
class SweepSpec:
    """One experiment: an axis to sweep plus everything held fixed.

    Time is normalised so that BS-only download of a file takes ``T_ref``:
    ``t_bs = T_ref / k`` and ``t_d = t_bs / bs_to_d2d``.
    """

    name: str
    axis: str
    grid: tuple[float, ...]
    codes: tuple[tuple[int, int], ...] = DEFAULT_CODES  # (n_c, k)
    bs_to_d2d: float = 10.0
    M_c: float = 30.0
    lambda_: float = 1.0
    mu: float = 1.0
    omega: float = 0.02
    delta: float = 1.0
    sigma: float = 0.0
    T_ref: float = 1.0
    Z: int | None = None
    file_size_bits: float | None = None
    capacity_bits: float | None = None
    epsilon: float = 1e-5

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if len(self.grid) == 0:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        if self.axis != "code" and not self.codes:
            raise ConfigError("no codes to evaluate")
        if (self.file_size_bits is None) != (self.capacity_bits is None):
            raise ConfigError("file_size_bits and capacity_bits go together")
        if self.capacity_bits is not None and self.Z is None:
            raise ConfigError("a storage budget needs a library size Z")

    def with_overrides(self, overrides: dict[str, Any]) -> "SweepSpec":
        names = {f.name for f in fields(self)}
        changes = {}
        for key, value in overrides.items():
            attr = "lambda_" if key == "lambda" else key
            if attr not in names:
                raise ConfigError(f"unknown preset field {key!r}")
            if attr == "grid":
                value = tuple(float(v) for v in value)
            elif attr == "codes":
                value = tuple((int(a), int(b)) for a, b in value)
            changes[attr] = value
        return replace(self, **changes)

    def describe(self) -> dict[str, Any]:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


PRESETS: dict[str, SweepSpec] = {
    "fig2": SweepSpec("fig2", "delta", DELTA_GRID, bs_to_d2d=10.0),
    "fig3": SweepSpec("fig3", "delta", DELTA_GRID, bs_to_d2d=100.0),
    "fig4": SweepSpec("fig4", "delta", DELTA_GRID, bs_to_d2d=1000.0),
    "fig5": SweepSpec("fig5", "sigma", SIGMA_GRID, bs_to_d2d=100.0, delta=0.5, Z=1000,
                      file_size_bits=100 * MB_BITS, capacity_bits=6 * GB_BITS),
}


def get_preset(name: str) -> SweepSpec:
    try:
        return PRESETS[name]
    except KeyError:
        import difflib
        close = difflib.get_close_matches(name, PRESETS, n=3, cutoff=0.3)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise ConfigError(f"unknown preset {name!r}{hint} (available: {', '.join(PRESETS)})") from None


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    params: SystemParams
    code: CodeParams
    popularity: PopularityModel | None

    @property
    def n_c(self) -> float:
        return self.params.n_c

    @property
    def F(self) -> int | None:
        return None if self.popularity is None else self.popularity.F


def sweep_points(spec: SweepSpec) -> list[SweepPoint]:
    """Points in output order: grid-major, then codes in the given order."""
    points = []
    for value in spec.grid:
        codes = [(3 * int(value), int(value))] if spec.axis == "code" else spec.codes
        for n_c, k in codes:
            delta = value if spec.axis == "delta" else spec.delta
            sigma = value if spec.axis == "sigma" else spec.sigma
            t_bs = spec.T_ref / k
            params = SystemParams(M_c=spec.M_c, n_c=float(n_c), lambda_=spec.lambda_, mu=spec.mu,
                                  omega=spec.omega, delta=float(delta), t_d=t_bs / spec.bs_to_d2d,
                                  t_bs=t_bs)
            code = CodeParams(n_code=max(int(n_c), k), k=k)
            report = validate(params, code)
            if not report.ok:
                raise ConfigError(f"point {spec.axis}={value}, code ({n_c},{k}): "
                                  + "; ".join(report.failures))
            popularity = None
            if spec.Z is not None:
                F = spec.Z
                if spec.capacity_bits is not None:
                    F = cached_file_count(StorageBudget(spec.file_size_bits, spec.capacity_bits,
                                                        spec.Z), code)
                popularity = PopularityModel(Z=spec.Z, sigma=float(sigma), F=F)
            points.append(SweepPoint(float(value), params, code, popularity))
    return points


def _snapshot_key(p: SystemParams) -> tuple:
    return (p.M_c, p.n_c, p.lambda_, p.mu, p.omega, p.delta)


def analytic_points(points: list[SweepPoint], policy: TruncationPolicy) -> list[DelayBreakdown]:
    cache: dict[tuple, RequestSnapshot] = {}
    out = []
    for pt in points:
        key = _snapshot_key(pt.params)
        if key not in cache:
            cache[key] = request_snapshot(pt.params, policy)
        out.append(evaluate(pt.params, pt.code, pt.popularity, policy, snapshot=cache[key]))
    return out


def _chunks(seq: list, n: int) -> list[list]:
    size = max(1, math.ceil(len(seq) / n))
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def _analytic_job(args):
    return analytic_points(*args)


def run_analytic(spec: SweepSpec, workers: int = 1) -> tuple[list[SweepPoint], list[DelayBreakdown]]:
    points = sweep_points(spec)
    policy = TruncationPolicy(spec.epsilon)
    if workers <= 1:
        return points, analytic_points(points, policy)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_analytic_job, [(c, policy) for c in _chunks(points, workers)])
        return points, [b for part in parts for b in part]


@dataclass(frozen=True)
class SimBudget:
    measured_requests: int = 100_000
    replications: int = 10
    warmup_requests: int = 2000


def sim_config(point: SweepPoint, seed: int, budget: SimBudget) -> SimConfig:
    return SimConfig(point.params, point.code, point.popularity, seed=seed,
                     warmup_requests=budget.warmup_requests,
                     measured_requests=budget.measured_requests,
                     replications=budget.replications)


def _trace_path(base: str | Path | None, index: int) -> Path | None:
    if base is None:
        return None
    base = Path(base)
    return base.with_name(f"{base.stem}_p{index:03d}{base.suffix or '.csv'}")


def _sim_job(args) -> SimStats:
    point, seed, budget, trace = args
    return run(sim_config(point, seed, budget), trace_path=trace)


def run_simulations(points: list[SweepPoint], seed: int, budget: SimBudget, workers: int = 1,
                    trace: str | Path | None = None) -> list[SimStats]:
    # one seed for every point: churn and request paths are shared across the grid
    jobs = [(pt, seed, budget, _trace_path(trace, i)) for i, pt in enumerate(points)]
    if workers <= 1:
        return [_sim_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sim_job, jobs))


BASE_COLUMNS = ("axis", "axis_value", "n_c", "k", "delta", "sigma", "t_d", "t_bs", "F")
ANALYTIC_COLUMNS = ("p_hit", "p_R1", "p_idle", "eta", "Tbar_eta", "Tbar_dw", "speedup")
SIM_COLUMNS = ("sim_mean_delay", "sim_mean_delay_se", "sim_speedup", "sim_p_R1", "sim_p_R1_se",
               "sim_p_idle", "sim_p_idle_se", "sim_eta", "sim_eta_se", "sim_requests")
COMPARE_COLUMNS = ("delay_rel_err", "worst_bin", "worst_bin_n_se", "pass")


def _base_row(spec: SweepSpec, pt: SweepPoint) -> dict[str, Any]:
    sigma = pt.popularity.sigma if pt.popularity is not None else spec.sigma
    return {"axis": spec.axis, "axis_value": pt.axis_value, "n_c": pt.params.n_c, "k": pt.code.k,
            "delta": pt.params.delta, "sigma": sigma, "t_d": pt.params.t_d, "t_bs": pt.params.t_bs,
            "F": pt.F if pt.F is not None else ""}


def _sim_row(stats: SimStats) -> dict[str, Any]:
    cfg = stats.config
    t_ref = cfg.code.k * cfg.params.t_bs
    return {"sim_mean_delay": stats.mean_delay.mean, "sim_mean_delay_se": stats.mean_delay.se,
            "sim_speedup": t_ref / stats.mean_delay.mean if stats.mean_delay.mean > 0 else math.inf,
            "sim_p_R1": stats.list_request_fraction.mean, "sim_p_R1_se": stats.list_request_fraction.se,
            "sim_p_idle": stats.idle_fraction.mean, "sim_p_idle_se": stats.idle_fraction.se,
            "sim_eta": stats.eta_hat.mean, "sim_eta_se": stats.eta_hat.se,
            "sim_requests": stats.total_requests}


def _compare_row(report: ComparisonReport) -> dict[str, Any]:
    bins = [it for it in report.items if it.name.startswith("outcome")]
    worst = max(bins, key=lambda it: it.n_se, default=None)
    return {"delay_rel_err": report.get("mean_delay").rel_err,
            "worst_bin": worst.name if worst else "",
            "worst_bin_n_se": worst.n_se if worst else 0.0,
            "pass": int(report.passed)}


def _fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(spec: SweepSpec, columns: Iterable[str], rows: list[dict[str, Any]],
               extra_header: dict[str, Any] | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# d2dcache sweep preset={spec.name}\n")
    buf.write(f"# spec={json.dumps(spec.describe(), sort_keys=True)}\n")
    for key, value in (extra_header or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    columns = list(columns)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the result the usual umask-derived mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[SweepPoint]
    analytic: list[DelayBreakdown] | None = None
    simulated: list[SimStats] | None = None
    reports: list[ComparisonReport] | None = None
    header: dict[str, Any] | None = None

    @property
    def columns(self) -> list[str]:
        cols = list(BASE_COLUMNS)
        if self.analytic is not None:
            cols += ANALYTIC_COLUMNS
        if self.simulated is not None:
            cols += SIM_COLUMNS
        if self.reports is not None:
            cols += COMPARE_COLUMNS
        return cols

    def rows(self) -> list[dict[str, Any]]:
        out = []
        for idx, pt in enumerate(self.points):
            row = _base_row(self.spec, pt)
            if self.analytic is not None:
                row.update(self.analytic[idx].row())
            if self.simulated is not None:
                row.update(_sim_row(self.simulated[idx]))
            if self.reports is not None:
                row.update(_compare_row(self.reports[idx]))
            out.append(row)
        return out

    def to_csv(self) -> str:
        return render_csv(self.spec, self.columns, self.rows(), self.header)

    @property
    def passed(self) -> bool:
        return self.reports is None or all(r.passed for r in self.reports)


def run_sweep(spec: SweepSpec, mode: str = "analytic", seed: int = 0,
              budget: SimBudget = SimBudget(), workers: int = 1,
              trace: str | Path | None = None) -> SweepResult:
    if mode not in ("analytic", "simulate", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    points = sweep_points(spec)
    result = SweepResult(spec, points)
    if mode in ("analytic", "both"):
        result.analytic = run_analytic(spec, workers)[1]
    if mode in ("simulate", "both"):
        result.simulated = run_simulations(points, seed, budget, workers, trace)
        result.header = {"seed": seed, "measured_requests": budget.measured_requests,
                         "replications": budget.replications,
                         "warmup_requests": budget.warmup_requests}
    return result


def run_compare(spec: SweepSpec, seed: int = 0, budget: SimBudget = SimBudget(),
                workers: int = 1, trace: str | Path | None = None) -> SweepResult:
    result = run_sweep(spec, "both", seed, budget, workers, trace)
    result.reports = [compare(s, a) for s, a in zip(result.simulated, result.analytic)]
    return result
