"""Threshold-crossing trigger on an indicator series.

The trigger fires when P falls below ``tau`` after having been at or above
it. With ``confirm > 1`` the reading must stay below for that many
consecutive evaluations; the reported step is the first of the streak.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from itertools import islice
from typing import Iterable, Iterator

import numpy as np

from . import _rng
from .errors import InvalidArgumentError, OrderingError
from .indicator import DEFAULT_PARAMS, IndicatorParams, IndicatorPoint, evaluate
from .quantile import SampleBudget

VIABLE_TAU = (0.725, 0.885)


@dataclass(frozen=True)
class TriggerConfig:
    tau: float = 0.8
    confirm: int = 1
    cadence: int = 1
    tau_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise InvalidArgumentError(f"tau must be in (0, 1), got {self.tau}")
        if self.confirm < 1:
            raise InvalidArgumentError("confirm must be >= 1")
        if self.cadence < 1:
            raise InvalidArgumentError("cadence must be >= 1")
        if self.tau_range is not None:
            lo, hi = self.tau_range
            if not 0.0 < lo <= hi < 1.0:
                raise InvalidArgumentError(f"tau_range {self.tau_range} must satisfy 0 < lo <= hi < 1")

    def as_dict(self) -> dict:
        d = {"tau": self.tau, "confirm": self.confirm, "cadence": self.cadence}
        if self.tau_range is not None:
            d["tau_range"] = list(self.tau_range)
        return d


@dataclass(frozen=True)
class TriggerState:
    armed: bool = False
    below_streak: int = 0
    streak_start: int | None = None
    fired_at: int | None = None
    last_step: int | None = None

    @property
    def fired(self) -> bool:
        return self.fired_at is not None


def trigger_step(
    state: TriggerState, step: int, value: float | None, config: TriggerConfig
) -> tuple[TriggerState, bool]:
    """Advance the state machine by one reading; ``value=None`` marks a degenerate step.

    Returns the new state and whether the trigger fired on this reading.
    """
    if state.last_step is not None and step <= state.last_step:
        raise OrderingError(f"step {step} does not follow {state.last_step}")
    state = replace(state, last_step=step)
    if state.fired or value is None:
        return state, False
    if value >= config.tau:
        return replace(state, armed=True, below_streak=0, streak_start=None), False
    if not state.armed:
        return state, False
    streak = state.below_streak + 1
    start = step if streak == 1 else state.streak_start
    if streak >= config.confirm:
        return replace(state, below_streak=streak, streak_start=start, fired_at=start), True
    return replace(state, below_streak=streak, streak_start=start), False


def detect_trigger(series: Iterable[IndicatorPoint], config: TriggerConfig) -> int | None:
    """Fold :func:`trigger_step` over every ``cadence``-th point; the fired step or None."""
    state = TriggerState()
    for point in islice(series, 0, None, config.cadence):
        state, fired = trigger_step(state, point.step, point.value, config)
        if fired:
            break
    return state.fired_at


def indicator_series(
    source,
    params: IndicatorParams = DEFAULT_PARAMS,
    *,
    cadence: int = 1,
    exact: bool = False,
    budget: SampleBudget | None = None,
    samples_per_rank: int | None = None,
    seed: int = 0,
) -> Iterator[IndicatorPoint]:
    """Indicator at every ``cadence``-th timestep of ``source``, computed lazily.

    Each timestep's sample seed is derived from ``(seed, timestep)``.
    """
    for t in list(source.timesteps)[::cadence]:
        snap = source.snapshot(t)
        yield evaluate(
            snap,
            params,
            exact=exact,
            budget=budget,
            samples_per_rank=samples_per_rank,
            seed=_rng.derive_key(seed, t) >> 1,
        )


def run_trigger(
    source,
    config: TriggerConfig,
    params: IndicatorParams = DEFAULT_PARAMS,
    **sampling,
) -> int | None:
    """Stream the indicator over ``source`` and stop at the first firing.

    Returns the fired timestep. ``sampling`` is passed to
    :func:`indicator_series`.
    """
    series = indicator_series(source, params, cadence=config.cadence, **sampling)
    return detect_trigger(series, replace(config, cadence=1))


@dataclass
class TriggerReport:
    fired_timestep: int | None
    fired_step: int | None
    config: TriggerConfig
    params: IndicatorParams
    budget: dict | None
    seed: int | None
    window: tuple[int, int] | None = None

    @property
    def in_window(self) -> bool | None:
        if self.window is None:
            return None
        return self.fired_step is not None and self.window[0] <= self.fired_step <= self.window[1]

    def as_dict(self) -> dict:
        d = {
            "fired_step": self.fired_step,
            "fired_timestep": self.fired_timestep,
            "tau": self.config.tau,
            "confirm": self.config.confirm,
            "cadence": self.config.cadence,
            "params": self.params.as_dict(),
            "budget": self.budget,
            "seed": self.seed,
        }
        if self.window is not None:
            d["window"] = list(self.window)
            d["in_window"] = self.in_window
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


@dataclass
class Realization:
    realization: int
    tau: float
    seed: int
    fired_step: int | None
    in_window: bool


@dataclass
class VariabilityStudy:
    rows: list[Realization]
    window: tuple[int, int]

    @property
    def fired_steps(self) -> np.ndarray:
        return np.array([r.fired_step for r in self.rows if r.fired_step is not None], dtype=float)

    @property
    def in_window_fraction(self) -> float:
        return sum(r.in_window for r in self.rows) / len(self.rows)

    @property
    def quartiles(self) -> tuple[float, float, float] | None:
        fs = self.fired_steps
        if fs.size == 0:
            return None
        q = np.quantile(fs, [0.25, 0.5, 0.75])
        return float(q[0]), float(q[1]), float(q[2])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["realization", "tau", "seed", "fired_step", "in_window"])
        for r in self.rows:
            fired = "" if r.fired_step is None else r.fired_step
            w.writerow([r.realization, repr(r.tau), r.seed, fired, int(r.in_window)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "realizations": len(self.rows),
            "in_window_fraction": self.in_window_fraction,
            "fired_quartiles": self.quartiles,
            "never_fired": sum(r.fired_step is None for r in self.rows),
            "window": list(self.window),
        }


def trigger_variability_study(
    source,
    params: IndicatorParams = DEFAULT_PARAMS,
    *,
    budget: SampleBudget | None = None,
    samples_per_rank: int | None = None,
    exact: bool = False,
    realizations: int = 200,
    tau_range: tuple[float, float] = VIABLE_TAU,
    confirm: int = 1,
    cadence: int | None = None,
    seed: int = 0,
) -> VariabilityStudy:
    """Repeat a sampled trigger run with random ``tau`` and fresh sample seeds.

    Realization ``r`` draws ``tau`` uniformly from ``tau_range`` and a sample
    seed, both from ``(seed, r)``. ``cadence`` defaults to one evaluation per
    recorded step.
    """
    if realizations < 1:
        raise InvalidArgumentError("realizations must be >= 1")
    if source.window is None:
        raise InvalidArgumentError("the source has no ground-truth window")
    cadence = source.substeps if cadence is None else cadence
    lo, hi = tau_range
    window = (source.window.lo, source.window.hi)
    exact_series = list(indicator_series(source, params, cadence=cadence, exact=True)) if exact else None
    rows = []
    for r in range(realizations):
        key = _rng.derive_key(0x7A, seed, r)
        tau = lo + (hi - lo) * _rng.uniform_scalar(key, 0)
        run_seed = _rng.derive_key(0x5E, seed, r) >> 1
        config = TriggerConfig(tau=tau, confirm=confirm, cadence=cadence)
        if exact_series is not None:
            fired_t = detect_trigger(exact_series, replace(config, cadence=1))
        else:
            fired_t = run_trigger(
                source, config, params, budget=budget, samples_per_rank=samples_per_rank, seed=run_seed
            )
        fired = source.recorded_step(fired_t)
        rows.append(Realization(r, tau, run_seed, fired, source.window.contains(fired)))
    return VariabilityStudy(rows, window)
