"""The P-indicator: share of the robust value range below the top band.

    P = (p_alpha - p_gamma) / (p_beta - p_gamma)

with gamma < alpha < beta. For uniformly spread values P is close to
(alpha - gamma) / (beta - gamma); it falls when the top percentiles pull
apart from the bulk.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _rng
from .errors import DegenerateRangeError, InvalidArgumentError
from .field import FieldSnapshot
from .quantile import P_INDICATOR, SampleBudget, estimate_percentiles, exact_percentiles

DEGENERACY_FLOOR = 1e-12

Interval = tuple[float, float]


@dataclass(frozen=True)
class IndicatorParams:
    alpha: float = 0.94
    beta: float = 0.98
    gamma: float = 0.01
    alpha_range: Interval | None = None
    beta_range: Interval | None = None
    gamma_range: Interval | None = None

    def __post_init__(self):
        lo = {}
        hi = {}
        for name in ("alpha", "beta", "gamma"):
            point = getattr(self, name)
            rng = getattr(self, f"{name}_range")
            a, b = (point, point) if rng is None else (float(rng[0]), float(rng[1]))
            if rng is not None and a > b:
                raise InvalidArgumentError(f"{name}_range {rng} is reversed")
            if not (0.0 < min(a, point) and max(b, point) < 1.0):
                raise InvalidArgumentError(f"{name} must lie in (0, 1)")
            lo[name], hi[name] = min(a, point), max(b, point)
        if not (hi["gamma"] < lo["alpha"] and hi["alpha"] < lo["beta"]):
            raise InvalidArgumentError(
                "levels must satisfy gamma < alpha < beta for every value in their ranges"
            )

    @property
    def randomized(self) -> bool:
        return any(r is not None for r in (self.alpha_range, self.beta_range, self.gamma_range))

    @property
    def uniform_value(self) -> float:
        """P for a uniform field: (alpha - gamma) / (beta - gamma)."""
        return (self.alpha - self.gamma) / (self.beta - self.gamma)

    def as_dict(self) -> dict:
        d = {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}
        for name in ("alpha", "beta", "gamma"):
            r = getattr(self, f"{name}_range")
            if r is not None:
                d[f"{name}_range"] = list(r)
        return d


DEFAULT_PARAMS = IndicatorParams()


def draw_params(params: IndicatorParams, seed: int) -> IndicatorParams:
    """Concrete levels, each drawn uniformly from its range when one is set."""
    key = _rng.derive_key(0x9A, seed)
    drawn = {}
    for i, name in enumerate(("alpha", "beta", "gamma")):
        rng = getattr(params, f"{name}_range")
        if rng is None:
            drawn[name] = getattr(params, name)
        else:
            lo, hi = rng
            drawn[name] = lo + (hi - lo) * _rng.uniform_scalar(key, i) if hi > lo else lo
    return IndicatorParams(**drawn)


def p_indicator(p_alpha: float, p_beta: float, p_gamma: float) -> float:
    span = p_beta - p_gamma
    if abs(span) < DEGENERACY_FLOOR * max(1.0, abs(p_beta), abs(p_gamma)):
        raise DegenerateRangeError(
            f"p_beta ({p_beta!r}) and p_gamma ({p_gamma!r}) coincide; field is (near) constant"
        )
    return (p_alpha - p_gamma) / span


@dataclass(frozen=True)
class IndicatorPoint:
    """One indicator evaluation. ``value`` is None for a degenerate step."""

    step: int
    value: float | None
    p_alpha: float
    p_beta: float
    p_gamma: float
    mode: str = "exact"
    k: int | None = None
    seed: int | None = None

    @property
    def degenerate(self) -> bool:
        return self.value is None


def _point(step, pa, pb, pg, mode, k, seed) -> IndicatorPoint:
    return IndicatorPoint(step, p_indicator(pa, pb, pg), pa, pb, pg, mode, k, seed)


def indicator_exact(field: FieldSnapshot, params: IndicatorParams = DEFAULT_PARAMS) -> IndicatorPoint:
    """Reference path: exact percentiles over every point of the field."""
    pg, pa, pb = exact_percentiles(field.materialize(), [params.gamma, params.alpha, params.beta])
    return _point(field.step, pa, pb, pg, "exact", None, None)


def indicator_sampled(
    field: FieldSnapshot,
    params: IndicatorParams = DEFAULT_PARAMS,
    budget: SampleBudget | None = None,
    seed: int = 0,
    *,
    samples_per_rank: int | None = None,
    exhaustive: bool = False,
) -> IndicatorPoint:
    """Estimate P from one shared sample feeding all three percentiles."""
    if samples_per_rank is None and not exhaustive:
        if budget is None:
            raise InvalidArgumentError("a sample budget or samples_per_rank is required")
        if budget.bound_kind != P_INDICATOR:
            raise InvalidArgumentError(
                f"indicator sampling needs a {P_INDICATOR} budget, got {budget.bound_kind}"
            )
    eg, ea, eb = estimate_percentiles(
        field,
        [params.gamma, params.alpha, params.beta],
        budget,
        seed,
        samples_per_rank=samples_per_rank,
        exhaustive=exhaustive,
    )
    mode = "exhaustive" if exhaustive else "sampled"
    return _point(field.step, ea.value, eb.value, eg.value, mode, ea.k_used, ea.seed)


def degenerate_point(step: int, mode: str, k=None, seed=None) -> IndicatorPoint:
    nan = math.nan
    return IndicatorPoint(step, None, nan, nan, nan, mode, k, seed)


def evaluate(
    field: FieldSnapshot,
    params: IndicatorParams = DEFAULT_PARAMS,
    *,
    exact: bool = False,
    budget: SampleBudget | None = None,
    samples_per_rank: int | None = None,
    seed: int = 0,
) -> IndicatorPoint:
    """Exact or sampled indicator, mapping a degenerate range to a marker point."""
    try:
        if exact:
            return indicator_exact(field, params)
        return indicator_sampled(field, params, budget, seed, samples_per_rank=samples_per_rank)
    except DegenerateRangeError:
        k = None if exact else (budget.k if samples_per_rank is None else None)
        return degenerate_point(field.step, "exact" if exact else "sampled", k, None if exact else seed)


@dataclass
class IndicatorErrorStats:
    k: int
    exact: float
    estimates: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        return self.estimates - self.exact

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.errors)))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.errors)))


def indicator_error_study(
    field: FieldSnapshot,
    params: IndicatorParams = DEFAULT_PARAMS,
    k: int = 48_000,
    runs: int = 100,
    seed: int = 0,
    exact_point: IndicatorPoint | None = None,
) -> IndicatorErrorStats:
    """``|P_hat - P|`` over ``runs`` sampled estimates; run ``r`` uses ``seed + r``."""
    if runs < 1:
        raise InvalidArgumentError("runs must be >= 1")
    exact_point = exact_point or indicator_exact(field, params)
    budget = SampleBudget.of_size(k, P_INDICATOR)
    est = np.array([indicator_sampled(field, params, budget, seed + r).value for r in range(runs)])
    return IndicatorErrorStats(k=k, exact=exact_point.value, estimates=est)


CSV_HEADER = ["step", "P", "p_alpha", "p_beta", "p_gamma", "mode", "k", "seed"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def series_to_csv(points: Iterable[IndicatorPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in points:
        w.writerow(
            [p.step, _fmt(p.value), _fmt(p.p_alpha), _fmt(p.p_beta), _fmt(p.p_gamma), p.mode, _fmt(p.k), _fmt(p.seed)]
        )
    return buf.getvalue()


def series_from_csv(text: str) -> list[IndicatorPoint]:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for r in rows:
        out.append(
            IndicatorPoint(
                step=int(r["step"]),
                value=float(r["P"]) if r["P"] else None,
                p_alpha=float(r["p_alpha"]),
                p_beta=float(r["p_beta"]),
                p_gamma=float(r["p_gamma"]),
                mode=r["mode"],
                k=int(r["k"]) if r["k"] else None,
                seed=int(r["seed"]) if r["seed"] else None,
            )
        )
    return out

