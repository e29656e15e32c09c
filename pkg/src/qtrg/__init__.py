"""Sublinear percentile sampling for in-situ trigger detection on scalar fields."""

__version__ = "0.1.0"

from .errors import (
    DegenerateRangeError,
    FormatError,
    InvalidArgumentError,
    InvalidPartitionError,
    OrderingError,
)
from .field import (
    FieldSnapshot,
    PartitionedField,
    PointEvaluator,
    gather_values,
    global_index_sample,
    per_rank_sample,
)
from .indicator import (
    DEFAULT_PARAMS,
    IndicatorParams,
    IndicatorPoint,
    draw_params,
    indicator_exact,
    indicator_sampled,
    p_indicator,
)
from .quantile import (
    SampleBudget,
    estimate_percentiles,
    exact_percentile,
    percentile_rank,
    quantile_error_study,
    samples_needed,
)
from .scenario import ScenarioSeries, ScenarioSpec, builtin_scenarios, generate_snapshot, ingest, load_scenario
from .trigger import (
    TriggerConfig,
    TriggerState,
    detect_trigger,
    run_trigger,
    trigger_step,
    trigger_variability_study,
)
