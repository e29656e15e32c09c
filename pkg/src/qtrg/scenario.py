"""Synthetic field time series with a known trigger window.

Each point is drawn from a three-component mixture whose weights follow a
piecewise-linear schedule over time:

* unburnt: a narrow band of high positive values,
* partially burnt: a wide band from slightly negative up to a peak above
  the unburnt band,
* burnt: a negative band.

While the field is all unburnt, P sits at its uniform value. As the
partially burnt share grows, the top two percent of values moves into the
partially burnt tail first, so p_beta climbs away from p_alpha and P drops
sharply. Schedules place that drop inside the ground-truth window.

Point i takes the i-th pair of a low-discrepancy sequence in the unit
square, shifted by a hash of (seed, timestep): the first coordinate picks
the component, the second places the value in its band. The realized
mixture then tracks the schedule far more closely than i.i.d. draws, so the exact
indicator of a snapshot barely depends on the seed even where P is steep.
Every value is a pure function of (seed, timestep, index), so a snapshot is
a lazy field and sampling k points costs k draws regardless of N.

Time has two units. Schedules, windows, and ``steps`` count *recorded*
steps. A scenario may run ``substeps`` simulation timesteps per recorded
step; snapshots, indicator points, and cadences use timesteps.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _rng
from .errors import FormatError, InvalidArgumentError
from .fileio import SnapshotHandle, ingest_series
from .field import FieldSnapshot, PartitionedField

Band = tuple[float, float]

_VALUE_STREAM = 0xA1
_NOISE_STREAM = 0xA2


@dataclass(frozen=True)
class GroundTruth:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidArgumentError(f"window [{self.lo}, {self.hi}] is reversed")

    def contains(self, step) -> bool:
        return step is not None and self.lo <= step <= self.hi


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario description.

    ``schedule`` rows are ``(step, w_unburnt, w_partial, w_burnt)`` knots,
    interpolated linearly in time and held constant past either end.
    """

    name: str
    size: int
    steps: int
    window: tuple[int, int]
    schedule: tuple[tuple[float, float, float, float], ...]
    unburnt: Band = (0.8, 1.0)
    partial: Band = (-0.3, 2.5)
    burnt: Band = (-1.0, -0.6)
    noise: float = 0.0
    seed: int = 0
    substeps: int = 1
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "window", tuple(int(x) for x in self.window))
        object.__setattr__(self, "schedule", tuple(tuple(float(x) for x in row) for row in self.schedule))
        for name in ("unburnt", "partial", "burnt"):
            band = tuple(float(x) for x in getattr(self, name))
            if len(band) != 2 or not band[0] < band[1]:
                raise InvalidArgumentError(f"{name} band must be (lo, hi) with lo < hi")
            object.__setattr__(self, name, band)
        if self.size < 1 or self.steps < 1 or self.substeps < 1:
            raise InvalidArgumentError("size, steps, and substeps must be >= 1")
        if self.noise < 0:
            raise InvalidArgumentError("noise must be >= 0")
        lo, hi = self.window
        if not 0 <= lo <= hi < self.steps:
            raise InvalidArgumentError(f"window {self.window} must satisfy 0 <= lo <= hi < steps")
        if not self.schedule:
            raise InvalidArgumentError("schedule needs at least one knot")
        knots = np.array(self.schedule)
        if knots.shape[1] != 4:
            raise InvalidArgumentError("schedule rows are (step, w_unburnt, w_partial, w_burnt)")
        if np.any(np.diff(knots[:, 0]) <= 0):
            raise InvalidArgumentError("schedule steps must be strictly increasing")
        w = knots[:, 1:]
        if np.any(w < 0) or np.any(w > 1) or np.any(np.abs(w.sum(axis=1) - 1) > 1e-9):
            raise InvalidArgumentError("schedule weights must lie in [0, 1] and sum to 1")

    @property
    def ground_truth(self) -> GroundTruth:
        return GroundTruth(*self.window)

    @property
    def timesteps(self) -> int:
        return self.steps * self.substeps

    def weights(self, time: float) -> tuple[float, float, float]:
        """Mixture weights (unburnt, partial, burnt) at a recorded-step time."""
        knots = np.array(self.schedule)
        w = np.array([np.interp(time, knots[:, 0], knots[:, c]) for c in (1, 2, 3)])
        w /= w.sum()
        return float(w[0]), float(w[1]), float(w[2])

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["schedule"] = [list(r) for r in self.schedule]
        for name in ("unburnt", "partial", "burnt"):
            d[name] = list(d[name])
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise FormatError(f"bad scenario document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_dict(json.loads(text))

    def with_(self, **changes) -> "ScenarioSpec":
        d = self.as_dict()
        d.update(changes)
        return ScenarioSpec.from_dict(d)


def _values(spec: ScenarioSpec, timestep: int, indices: np.ndarray) -> np.ndarray:
    w_u, w_p, w_b = spec.weights(timestep / spec.substeps)
    u_comp, u_val = _rng.lattice2(_rng.derive_key(spec.seed, timestep, _VALUE_STREAM), indices)
    lo = np.full(indices.shape, spec.unburnt[0])
    hi = np.full(indices.shape, spec.unburnt[1])
    burnt = u_comp < w_b
    partial = ~burnt & (u_comp < w_b + w_p)
    lo[partial], hi[partial] = spec.partial
    lo[burnt], hi[burnt] = spec.burnt
    out = lo + u_val * (hi - lo)
    if spec.noise > 0:
        key = _rng.derive_key(spec.seed, timestep, _NOISE_STREAM)
        out += spec.noise * (2.0 * _rng.uniform(key, indices) - 1.0)
    return out


def generate_snapshot(spec: ScenarioSpec, timestep: int, ranks: int | PartitionedField | None = None) -> FieldSnapshot:
    """Lazy snapshot at a simulation timestep in ``[0, spec.timesteps)``."""
    if not 0 <= timestep < spec.timesteps:
        raise InvalidArgumentError(f"timestep {timestep} outside [0, {spec.timesteps})")
    if isinstance(ranks, PartitionedField):
        part = ranks
    else:
        part = PartitionedField.even(spec.size, ranks) if ranks else None
    t = int(timestep)
    snap = FieldSnapshot.lazy(lambda idx: _values(spec, t, idx), spec.size, step=t)
    if part is not None:
        snap = FieldSnapshot(step=t, size=spec.size, evaluator=snap.evaluator, partition=part)
    return snap


# Knot tables are tuned so that the exact indicator at the default levels
# stays near its uniform value until the window and falls below 0.725 well
# before the window closes; see tests/test_scenario.py.
_HCCI_SCHEDULE = (
    (0, 1.0, 0.0, 0.0),
    (100, 1.0, 0.0, 0.0),
    (180, 0.975, 0.025, 0.0),
    (190, 0.9625, 0.0375, 0.0),
    (200, 0.95, 0.05, 0.0),
    (225, 0.892, 0.1, 0.008),
    (260, 0.65, 0.25, 0.10),
    (320, 0.20, 0.30, 0.50),
    (399, 0.05, 0.10, 0.85),
)

_RCCI_SCHEDULE = (
    (0, 1.0, 0.0, 0.0),
    (8, 1.0, 0.0, 0.0),
    (16, 0.9618, 0.0382, 0.0),
    (22, 0.9618, 0.0382, 0.0),
    (28, 0.99, 0.01, 0.0),
    (36, 0.975, 0.025, 0.0),
    (44, 0.955, 0.045, 0.0),
    (50, 0.895, 0.1, 0.005),
    (60, 0.7, 0.2, 0.1),
    (99, 0.1, 0.1, 0.8),
)

_TINY_SCHEDULE = (
    (0, 1.0, 0.0, 0.0),
    (3, 0.98, 0.02, 0.0),
    (4, 0.95, 0.05, 0.0),
    (5, 0.94, 0.06, 0.0),
    (9, 0.85, 0.1, 0.05),
)

BUILTIN_SCENARIOS: dict[str, ScenarioSpec] = {
    "hcci_t40_like": ScenarioSpec(
        name="hcci_t40_like",
        size=451_584,
        steps=400,
        window=(175, 225),
        schedule=_HCCI_SCHEDULE,
        noise=0.002,
        seed=40,
        substeps=100,
        description="Size and trigger window of the HCCI T=40 case; 100 timesteps per recorded step.",
    ),
    "rcci_like": ScenarioSpec(
        name="rcci_like",
        size=2_560_000,
        steps=100,
        window=(38, 50),
        schedule=_RCCI_SCHEDULE,
        noise=0.002,
        seed=6,
        substeps=10,
        description="Size and window of the RCCI case 6; a shallow first-stage dip precedes the main descent.",
    ),
    "tiny": ScenarioSpec(
        name="tiny",
        size=20_000,
        steps=10,
        window=(3, 6),
        schedule=_TINY_SCHEDULE,
        seed=1,
        description="Ten-step scenario for quick runs and tests.",
    ),
}


def builtin_scenarios() -> dict[str, ScenarioSpec]:
    return dict(BUILTIN_SCENARIOS)


def load_scenario(name_or_path: str) -> ScenarioSpec:
    """A builtin by name, or a ``scenario.json`` document by path."""
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path]
    path = Path(name_or_path)
    if path.is_dir():
        path = path / "scenario.json"
    if not path.exists():
        raise InvalidArgumentError(
            f"unknown scenario {name_or_path!r}; builtins are {sorted(BUILTIN_SCENARIOS)}"
        )
    try:
        return ScenarioSpec.from_json(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}", path) from exc


class ScenarioSeries:
    """Timestep-indexed view of a scenario for indicator and trigger runs."""

    def __init__(self, spec: ScenarioSpec, ranks: int | None = None):
        self.spec = spec
        self.partition = PartitionedField.even(spec.size, ranks) if ranks else None

    @property
    def timesteps(self) -> Sequence[int]:
        return range(self.spec.timesteps)

    @property
    def substeps(self) -> int:
        return self.spec.substeps

    @property
    def window(self) -> GroundTruth:
        return self.spec.ground_truth

    def recorded_step(self, timestep):
        return None if timestep is None else int(timestep) // self.spec.substeps

    def snapshot(self, timestep: int) -> FieldSnapshot:
        return generate_snapshot(self.spec, timestep, self.partition)


class FileSeries:
    """Series read from a snapshot directory; files load on access."""

    def __init__(self, directory, ranks: int | None = None):
        self.directory = Path(directory)
        self.handles: list[SnapshotHandle] = ingest_series(self.directory)
        self._by_step = {h.step: h for h in self.handles}
        self.ranks = ranks
        self.spec = None
        sj = self.directory / "scenario.json"
        if sj.exists():
            self.spec = load_scenario(str(sj))

    @property
    def timesteps(self) -> Sequence[int]:
        return [h.step for h in self.handles]

    @property
    def substeps(self) -> int:
        return 1

    @property
    def window(self) -> GroundTruth | None:
        return self.spec.ground_truth if self.spec is not None else None

    def recorded_step(self, timestep):
        return timestep

    def snapshot(self, timestep: int) -> FieldSnapshot:
        return self._by_step[timestep].load(self.ranks)


def ingest(directory, ranks: int | None = None) -> FileSeries:
    return FileSeries(directory, ranks)


__all__ = [
    "BUILTIN_SCENARIOS",
    "FileSeries",
    "GroundTruth",
    "ScenarioSeries",
    "ScenarioSpec",
    "builtin_scenarios",
    "generate_snapshot",
    "ingest",
    "ingest_series",
    "load_scenario",
]
