"""Percentiles: exact order statistics, sampled estimates, and sample budgets.

The alpha-percentile of N values is the ceil(alpha * N)-th smallest entry
(1-based). A sampled estimate draws k indices uniformly with replacement,
sorts the k gathered values, and reads the same order statistic of the
sample. Hoeffding's inequality gives the sample count needed for the
estimate's rank to land within epsilon of alpha with probability 1 - delta.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .field import FieldSnapshot, gather_values, sample_indices

SINGLE_PERCENTILE = "single_percentile"
P_INDICATOR = "p_indicator"

# union bound: two tails per percentile, three percentiles per indicator
_FAILURE_SPLIT = {SINGLE_PERCENTILE: 4.0, P_INDICATOR: 12.0}

_BOUND_ALIASES = {
    "single": SINGLE_PERCENTILE,
    "single_percentile": SINGLE_PERCENTILE,
    "pind": P_INDICATOR,
    "p_indicator": P_INDICATOR,
}


def normalize_bound(kind: str) -> str:
    try:
        return _BOUND_ALIASES[kind]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown bound kind {kind!r}; expected one of {sorted(_BOUND_ALIASES)}"
        ) from None


def samples_needed(epsilon: float, delta: float, bound_kind: str = SINGLE_PERCENTILE) -> int:
    """Sample count ``ceil(ln(c / delta) / (2 epsilon**2))``.

    ``c`` is 4 for a single percentile and 12 for the three percentiles of
    the P-indicator. The count does not depend on the field size.

    >>> samples_needed(0.01, 0.001, "p_indicator")
    46964
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgumentError(f"epsilon must be in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must be in (0, 1), got {delta}")
    c = _FAILURE_SPLIT[normalize_bound(bound_kind)]
    return max(1, math.ceil(math.log(c / delta) / (2.0 * epsilon * epsilon)))


def implied_epsilon(k: int, delta: float, bound_kind: str = SINGLE_PERCENTILE) -> float:
    """Smallest epsilon that ``k`` samples guarantee at confidence ``1 - delta``."""
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    c = _FAILURE_SPLIT[normalize_bound(bound_kind)]
    return math.sqrt(math.log(c / delta) / (2.0 * k))


@dataclass(frozen=True)
class SampleBudget:
    """Sample count with the (epsilon, delta) guarantee it carries."""

    k: int
    epsilon: float
    delta: float
    bound_kind: str = P_INDICATOR

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError("k must be >= 1")
        object.__setattr__(self, "bound_kind", normalize_bound(self.bound_kind))

    @classmethod
    def for_error(cls, epsilon: float, delta: float, bound_kind: str = P_INDICATOR) -> "SampleBudget":
        return cls(samples_needed(epsilon, delta, bound_kind), epsilon, delta, bound_kind)

    @classmethod
    def of_size(cls, k: int, bound_kind: str = P_INDICATOR, delta: float = 0.001) -> "SampleBudget":
        """Fixed ``k``; epsilon is whatever the bound implies at ``delta``."""
        return cls(int(k), implied_epsilon(k, delta, bound_kind), delta, bound_kind)

    def as_dict(self) -> dict:
        return {"k": self.k, "epsilon": self.epsilon, "delta": self.delta, "bound_kind": self.bound_kind}


DEFAULT_BUDGET = SampleBudget.for_error(0.01, 0.001, P_INDICATOR)


def _check_level(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(f"percentile level must be in (0, 1], got {alpha}")


def order_index(alpha: float, n: int) -> int:
    """1-based ``ceil(alpha * n)`` clamped to ``[1, n]``.

    ``alpha`` is read as the decimal it prints as, so 0.94 * 100 is exactly 94
    rather than a float product that may round either way.
    """
    _check_level(alpha)
    r = math.ceil(Fraction(repr(float(alpha))) * n)
    return min(max(r, 1), n)


def exact_percentile(values, alpha: float) -> float:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidArgumentError("cannot take a percentile of an empty array")
    i = order_index(alpha, v.size) - 1
    return float(np.partition(v, i)[i])


def exact_percentiles(values, levels: Sequence[float]) -> list[float]:
    """Several exact percentiles with one partial sort."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidArgumentError("cannot take a percentile of an empty array")
    idx = [order_index(a, v.size) - 1 for a in levels]
    part = np.partition(v, sorted(set(idx)))
    return [float(part[i]) for i in idx]


def percentile_rank(values, x: float) -> float:
    """Fraction of entries ``<= x``."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidArgumentError("cannot rank against an empty array")
    return float(np.count_nonzero(v <= x)) / v.size


@dataclass(frozen=True)
class PercentileEstimate:
    level: float
    value: float
    k_used: int
    seed: int | None


def _draw_sample(field: FieldSnapshot, k, seed, samples_per_rank, exhaustive):
    if exhaustive:
        idx = np.arange(field.size, dtype=np.int64)
    else:
        idx = sample_indices(field, seed, k=k, samples_per_rank=samples_per_rank)
    return gather_values(field, idx)


def estimate_percentiles(
    field: FieldSnapshot,
    levels: Sequence[float],
    budget: SampleBudget | int | None = None,
    seed: int = 0,
    *,
    samples_per_rank: int | None = None,
    exhaustive: bool = False,
) -> list[PercentileEstimate]:
    """Estimate several percentiles from one shared uniform sample.

    The sample is drawn once (``budget.k`` global draws, or
    ``samples_per_rank`` draws from each rank of ``field.partition``),
    sorted, and each level is read at ``ceil(level * k)``. ``exhaustive``
    replaces sampling with every index, which reproduces the exact
    percentiles; it exists for testing.
    """
    for a in levels:
        _check_level(a)
    k = budget.k if isinstance(budget, SampleBudget) else budget
    if not exhaustive and samples_per_rank is None and (k is None or k < 1):
        raise InvalidArgumentError("a budget with k >= 1 is required")
    sample = np.sort(_draw_sample(field, k, seed, samples_per_rank, exhaustive))
    n = sample.size
    used_seed = None if exhaustive else seed
    return [
        PercentileEstimate(a, float(sample[order_index(a, n) - 1]), n, used_seed) for a in levels
    ]


@dataclass
class ErrorStats:
    """Per-run rank errors ``percentile_rank(estimate) - alpha``."""

    alpha: float
    k: int
    errors: np.ndarray
    estimates: np.ndarray = dc_field(repr=False)

    @property
    def runs(self) -> int:
        return int(self.errors.size)

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.errors)))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.errors)))

    @property
    def quartiles(self) -> tuple[float, float, float]:
        q = np.quantile(self.errors, [0.25, 0.5, 0.75])
        return float(q[0]), float(q[1]), float(q[2])

    def summary(self) -> dict:
        q25, q50, q75 = self.quartiles
        return {
            "alpha": self.alpha,
            "k": self.k,
            "runs": self.runs,
            "mean_abs": self.mean_abs,
            "max_abs": self.max_abs,
            "q25": q25,
            "q50": q50,
            "q75": q75,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "epsilon"])
        for r, e in enumerate(self.errors):
            w.writerow([r, repr(float(e))])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def quantile_error_study(
    field: FieldSnapshot,
    alpha: float,
    budget: SampleBudget | int,
    runs: int = 100,
    seed: int = 0,
    reference: np.ndarray | None = None,
) -> ErrorStats:
    """Repeat the sampled estimate ``runs`` times and measure each rank error.

    Run ``r`` uses seed ``seed + r``. ``reference`` is the full sorted value
    array; pass it to reuse one materialization across several studies.
    """
    if runs < 1:
        raise InvalidArgumentError("runs must be >= 1")
    _check_level(alpha)
    k = budget.k if isinstance(budget, SampleBudget) else int(budget)
    if reference is None:
        reference = np.sort(field.eager().values)
    n = reference.size
    estimates = np.empty(runs)
    for r in range(runs):
        (est,) = estimate_percentiles(field, [alpha], k, seed + r)
        estimates[r] = est.value
    ranks = np.searchsorted(reference, estimates, side="right") / n
    return ErrorStats(alpha=alpha, k=k, errors=ranks - alpha, estimates=estimates)
