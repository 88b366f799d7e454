"""Scalar model inputs: cluster churn/request rates, MDS code, storage budget."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed or unknown configuration input."""


@dataclass(frozen=True)
class SystemParams:
    """Cluster model: Poisson churn, per-node request rate, update period, link speeds.

    ``M_c`` and ``n_c`` are means of Poisson populations and may be non-integer.
    The cell-wide counts ``M`` and ``n`` follow from the cluster count ``C``.
    """

    M_c: float
    n_c: float
    lambda_: float = 1.0
    mu: float = 1.0
    omega: float = 0.02
    delta: float = 1.0
    t_d: float = 0.02
    t_bs: float = 0.2
    C: int = 1
    allow_rate_mismatch: bool = False

    @property
    def M(self) -> float:
        return self.M_c * self.C

    @property
    def n(self) -> float:
        return self.n_c * self.C

    @property
    def regular_mean(self) -> float:
        """Mean number of regular (non-storage) nodes in the cluster."""
        return self.M_c - self.n_c

    def replace(self, **changes: Any) -> "SystemParams":
        d = asdict(self)
        d.update(changes)
        return SystemParams(**d)

    # JSON uses the model's own names; ``lambda`` is a Python keyword.
    _JSON_KEYS = ("M", "C", "M_c", "n", "n_c", "lambda", "mu", "omega",
                  "delta", "t_d", "t_bs", "allow_rate_mismatch")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemParams":
        unknown = set(data) - set(cls._JSON_KEYS)
        if unknown:
            raise ConfigError(f"unknown SystemParams keys: {sorted(unknown)}")
        d = dict(data)
        C = int(d.pop("C", 1))
        if C < 1:
            raise ConfigError("C must be >= 1")
        M, n = d.pop("M", None), d.pop("n", None)
        if "M_c" not in d:
            if M is None:
                raise ConfigError("one of M_c or M is required")
            d["M_c"] = M / C
        elif M is not None and not math.isclose(M / C, d["M_c"]):
            raise ConfigError("M/C disagrees with M_c")
        if "n_c" not in d:
            if n is None:
                raise ConfigError("one of n_c or n is required")
            d["n_c"] = n / C
        elif n is not None and not math.isclose(n / C, d["n_c"]):
            raise ConfigError("n/C disagrees with n_c")
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(C=C, **d)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


@dataclass(frozen=True)
class CodeParams:
    """An (n_code, k) MDS code: any k of the n_code coded symbols rebuild a file."""

    n_code: int
    k: int

    @property
    def rate(self) -> float:
        return self.k / self.n_code


@dataclass(frozen=True)
class StorageBudget:
    file_size_bits: float
    capacity_bits: float
    library_size: int


@dataclass(frozen=True)
class ValidationReport:
    failures: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok


def validate(params: SystemParams, code: CodeParams | None = None) -> ValidationReport:
    """Check every model invariant; failures are collected, never raised."""
    fail: list[str] = []
    warn: list[str] = []
    for name in ("lambda_", "mu", "omega", "t_d", "t_bs"):
        v = getattr(params, name)
        if not (v > 0 and math.isfinite(v)):
            fail.append(f"{name.rstrip('_')} must be positive and finite (got {v})")
    if not (params.delta >= 0 and math.isfinite(params.delta)):
        fail.append(f"delta must be >= 0 (got {params.delta})")
    if not params.M_c > 0:
        fail.append(f"M_c must be positive (got {params.M_c})")
    if not params.n_c >= 0:
        fail.append(f"n_c must be >= 0 (got {params.n_c})")
    if params.n_c > params.M_c:
        fail.append(f"n_c > M_c ({params.n_c} > {params.M_c})")
    if params.mu != params.lambda_ and not params.allow_rate_mismatch:
        fail.append(f"mu != lambda ({params.mu} != {params.lambda_}); "
                    "set allow_rate_mismatch to override")
    if params.t_bs <= params.t_d:
        warn.append(f"t_bs <= t_d ({params.t_bs} <= {params.t_d}); "
                    "BS downloads are expected to be much slower")
    if code is not None:
        if not 1 <= code.k <= code.n_code:
            fail.append(f"need 1 <= k <= n_code (k={code.k}, n_code={code.n_code})")
        if code.k > params.n_c:
            fail.append(f"k > n_c ({code.k} > {params.n_c})")
    return ValidationReport(tuple(fail), tuple(warn))


def check(params: SystemParams, code: CodeParams | None = None) -> None:
    """Raise :class:`ConfigError` when :func:`validate` fails; emit its warnings."""
    report = validate(params, code)
    for w in report.warnings:
        warnings.warn(w, stacklevel=2)
    if not report.ok:
        raise ConfigError("; ".join(report.failures))


def cached_file_count(budget: StorageBudget, code: CodeParams) -> int:
    """Number of most-popular files a device can hold one coded symbol of.

    A symbol is ``file_size_bits / k`` bits, so F = floor(capacity / symbol),
    capped at the library size.
    """
    if budget.file_size_bits <= 0 or budget.capacity_bits <= 0 or budget.library_size < 1:
        raise ConfigError("storage budget fields must be positive")
    # capacity*k/size rather than capacity/(size/k): exact for integer-valued inputs
    per_device = math.floor(budget.capacity_bits * code.k / budget.file_size_bits + 1e-9)
    return min(budget.library_size, per_device)


def load_params(path: str | Path) -> SystemParams:
    with open(path) as fh:
        return SystemParams.from_dict(json.load(fh))


def field_names(cls: type) -> list[str]:
    return [f.name for f in fields(cls)]
