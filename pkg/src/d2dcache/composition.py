"""Node populations seen by a request and the probability that the requester is listed.

A request arrives somewhere inside an update interval. The listed storage
nodes it can reach are the survivors of the storage population present at the
last broadcast; the request instant itself is biased towards crowded intervals
because every node issues requests.

Vectors are indexed by count and truncated with :class:`TruncationPolicy`;
storage-node axes run to ``truncation_index(n_c)``, regular/all-node axes to
``truncation_index(M_c)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernels import (TruncationPolicy, poisson_pmf, truncation_index,
                      windowed_survivors_matrix)
from .params import SystemParams

INSTANT_DELTA = 1e-9
NORMALIZATION_TOL = 1e-5


class NormalizationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class RequestSnapshot:
    px1: np.ndarray          # P(X1 = x): listed storage nodes alive at the request
    pq: np.ndarray           # P(Q = q): all storage nodes present
    pv: np.ndarray           # P(V = v): regular nodes present
    pr1_given_x: np.ndarray  # P(R = 1 | X1 = x)
    p_R1: float
    px1_given_R: tuple[np.ndarray | None, np.ndarray | None]
    mean_X1: float
    mean_Q: float
    instantaneous: bool = False

    @property
    def p_R0(self) -> float:
        return 1.0 - self.p_R1


def _axes(params: SystemParams, policy: TruncationPolicy) -> tuple[int, int]:
    return truncation_index(params.n_c, policy), truncation_index(params.M_c, policy)


def _require_interval(params: SystemParams) -> None:
    if params.delta < INSTANT_DELTA:
        raise ValueError("delta = 0 has no update interval; use instantaneous_snapshot")


def _joint_request_weights(params: SystemParams, policy: TruncationPolicy) -> np.ndarray:
    """w[y, r] proportional to P(Y=y, regular=r | some request in the interval).

    Normalised by its own total, which equals the single-sum request probability
    over the whole population (sum of independent Poissons) up to truncation.
    """
    t_s, t_m = _axes(params, policy)
    y = np.arange(t_s + 1)
    r = np.arange(t_m + 1)
    w = -np.expm1(-(y[:, None] + r[None, :]) * params.omega * params.delta)
    w *= poisson_pmf(y, params.n_c)[:, None] * poisson_pmf(r, params.regular_mean)[None, :]
    total = w.sum()
    if total <= 0:
        raise ValueError("no requests can occur (omega * delta * M_c == 0)")
    return w / total


def storage_at_update_vector(params: SystemParams,
                             policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    _require_interval(params)
    return _joint_request_weights(params, policy).sum(axis=1)


def storage_at_update_pmf(y: int, params: SystemParams,
                          policy: TruncationPolicy = TruncationPolicy()) -> float:
    """P(Y = y): storage nodes present at the start of the interval holding a request."""
    vec = storage_at_update_vector(params, policy)
    return float(vec[y]) if 0 <= y < vec.size else 0.0


def ds_list_alive_vector(params: SystemParams,
                         policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    py = storage_at_update_vector(params, policy)
    K = _survivor_matrix(py.size - 1, params.mu, params.delta)
    return py @ K


@lru_cache(maxsize=256)
def _survivor_matrix_cached(y_max: int, mu: float, delta: float) -> np.ndarray:
    K = windowed_survivors_matrix(y_max, mu, delta)
    K.setflags(write=False)
    return K


def _survivor_matrix(y_max: int, mu: float, delta: float) -> np.ndarray:
    return _survivor_matrix_cached(int(y_max), float(mu), float(delta))


def ds_list_alive_pmf(x: int, params: SystemParams,
                      policy: TruncationPolicy = TruncationPolicy()) -> float:
    vec = ds_list_alive_vector(params, policy)
    return float(vec[x]) if 0 <= x < vec.size else 0.0


def storage_total_vector(params: SystemParams,
                         policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    # Same request-biased weighting as Y: storage arrivals and departures balance.
    _require_interval(params)
    return _joint_request_weights(params, policy).sum(axis=1)


def storage_total_pmf(q: int, params: SystemParams,
                      policy: TruncationPolicy = TruncationPolicy()) -> float:
    vec = storage_total_vector(params, policy)
    return float(vec[q]) if 0 <= q < vec.size else 0.0


def regular_vector(params: SystemParams,
                   policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    _require_interval(params)
    return _joint_request_weights(params, policy).sum(axis=0)


def regular_pmf(v: int, params: SystemParams,
                policy: TruncationPolicy = TruncationPolicy()) -> float:
    vec = regular_vector(params, policy)
    return float(vec[v]) if 0 <= v < vec.size else 0.0


def request_type_given_x1_vector(x_max: int, pv: np.ndarray, unlisted_mean: float,
                                 policy: TruncationPolicy = TruncationPolicy()) -> np.ndarray:
    """P(R=1 | X1=x) for x = 0..x_max.

    The requester is uniform over the q + v present nodes, of which x are listed.
    Unlisted storage nodes q - x are approximated as Poisson(``unlisted_mean``)
    independent of x; regular nodes follow ``pv``.
    """
    unlisted_mean = max(unlisted_mean, 0.0)
    s = np.arange(truncation_index(unlisted_mean, policy) + 1)
    ps = poisson_pmf(s, unlisted_mean)
    v = np.arange(pv.size)
    x = np.arange(x_max + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = x[:, None, None] / (x[:, None, None] + s[None, :, None] + v[None, None, :])
    frac[0] = 0.0
    return np.einsum("xsv,s,v->x", frac, ps, pv)


def request_type_given_x1(x: int, pv: np.ndarray, mean_Q: float, mean_X1: float,
                          policy: TruncationPolicy = TruncationPolicy()) -> float:
    if x <= 0:
        return 0.0
    return float(request_type_given_x1_vector(x, pv, mean_Q - mean_X1, policy)[x])


def request_from_list_prob(snapshot: RequestSnapshot) -> float:
    return float(np.dot(snapshot.pr1_given_x, snapshot.px1))


def _posteriors(px: np.ndarray, pr1x: np.ndarray, p_r1: float
                ) -> tuple[np.ndarray | None, np.ndarray | None]:
    post1 = pr1x * px / p_r1 if p_r1 > 0 else None
    post0 = (1.0 - pr1x) * px / (1.0 - p_r1) if p_r1 < 1 else None
    return post0, post1


def ds_list_alive_given_request_type(x: int, i: int, snapshot: RequestSnapshot) -> float | None:
    """P(X1 = x | R = i) by Bayes' rule.

    Returns ``None`` when P(R = i) = 0: the conditional is undefined and callers
    treat that request type as carrying zero weight.
    """
    post = snapshot.px1_given_R[i]
    if post is None:
        return None
    return float(post[x]) if 0 <= x < post.size else 0.0


def _check_residue(name: str, vec: np.ndarray) -> None:
    residue = abs(float(vec.sum()) - 1.0)
    if residue > NORMALIZATION_TOL:
        warnings.warn(f"{name} sums to 1 - {residue:.2e} after truncation",
                      NormalizationWarning, stacklevel=3)


def instantaneous_snapshot(params: SystemParams,
                           policy: TruncationPolicy = TruncationPolicy()) -> RequestSnapshot:
    """Closed forms when every request sees the current storage population."""
    t_s, t_m = _axes(params, policy)
    x = np.arange(t_s + 1)
    px = poisson_pmf(x, params.n_c)
    r = np.arange(t_m + 1)
    pv = poisson_pmf(r, params.regular_mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = x[:, None] / (x[:, None] + r[None, :])
    frac[0] = 0.0
    pr1x = frac @ pv
    p_r1 = params.n_c / params.M_c
    mean_x = float(np.dot(x, px))
    post0, post1 = _posteriors(px, pr1x, p_r1)
    return RequestSnapshot(px1=px, pq=px.copy(), pv=pv, pr1_given_x=pr1x, p_R1=p_r1,
                           px1_given_R=(post0, post1), mean_X1=mean_x, mean_Q=mean_x,
                           instantaneous=True)


def interval_snapshot(params: SystemParams,
                      policy: TruncationPolicy = TruncationPolicy()) -> RequestSnapshot:
    _require_interval(params)
    w = _joint_request_weights(params, policy)
    py = w.sum(axis=1)
    pv = w.sum(axis=0)
    K = _survivor_matrix(py.size - 1, params.mu, params.delta)
    px = py @ K
    pq = py.copy()
    counts = np.arange(py.size)
    mean_x = float(np.dot(counts, px))
    mean_q = float(np.dot(counts, pq))
    pr1x = request_type_given_x1_vector(px.size - 1, pv, mean_q - mean_x, policy)
    p_r1 = float(np.dot(pr1x, px))
    post0, post1 = _posteriors(px, pr1x, p_r1)
    for name, vec in (("P(X1)", px), ("P(Q)", pq), ("P(V)", pv)):
        _check_residue(name, vec)
    return RequestSnapshot(px1=px, pq=pq, pv=pv, pr1_given_x=pr1x, p_R1=p_r1,
                           px1_given_R=(post0, post1), mean_X1=mean_x, mean_Q=mean_q)


def request_snapshot(params: SystemParams,
                     policy: TruncationPolicy = TruncationPolicy()) -> RequestSnapshot:
    if params.delta < INSTANT_DELTA:
        return instantaneous_snapshot(params, policy)
    return interval_snapshot(params, policy)
