"""Command-line entry point: ``qtrg <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 degenerate
data (no step produced a usable indicator).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateRangeError, FormatError, InvalidArgumentError, InvalidPartitionError
from .fileio import atomic_write, encode_qf1, load_snapshot, step_filename
from .indicator import IndicatorParams, series_to_csv
from .quantile import (
    P_INDICATOR,
    SampleBudget,
    normalize_bound,
    quantile_error_study,
    samples_needed,
)
from .scenario import FileSeries, ScenarioSeries, generate_snapshot, load_scenario
from .trigger import (
    TriggerConfig,
    TriggerReport,
    detect_trigger,
    indicator_series,
    trigger_variability_study,
)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4

DEFAULT_RANKS = 784


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("QTRG_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"QTRG_SEED must be an integer, got {raw!r}") from None


class RunRecorder:
    """Collects outputs for the ``manifest.json`` written next to them."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.params = {k: v for k, v in vars(args).items() if k != "func"}
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.outputs: list[str] = []
        self.inputs = [str(p) for p in (getattr(args, "input", None),) if p]
        self.start = time.perf_counter()
        self.extra: dict = {}

    def write(self, name: str, data: bytes | str) -> Path:
        path = atomic_write(self.out / name, data)
        self.outputs.append(name)
        return path

    def finish(self) -> None:
        if self.out is None:
            return
        doc = {
            "command": self.command,
            "params": self.params,
            "seed": self.params.get("seed"),
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "version": __version__,
            "wall_time": time.perf_counter() - self.start,
        }
        doc.update(self.extra)
        atomic_write(self.out / "manifest.json", json.dumps(doc, indent=2, default=str))


def _probability(flag: str):
    def parse(text: str) -> float:
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a number, got {text!r}") from None
        if not 0.0 < x < 1.0:
            raise argparse.ArgumentTypeError(f"{flag} must be in (0, 1), got {text}")
        return x

    return parse


def _positive_int(flag: str):
    def parse(text: str) -> int:
        try:
            x = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {text!r}") from None
        if x < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {text}")
        return x

    return parse


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("list entries must be >= 1")
    return values


def _step_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# --- samples-needed -------------------------------------------------------


def cmd_samples_needed(args) -> int:
    kind = normalize_bound(args.bound)
    if args.table:
        eps_grid = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001]
        confidences = [0.9, 0.99, 0.999]
        lines = ["epsilon," + ",".join(f"k@{c}" for c in confidences)]
        for eps in eps_grid:
            ks = [samples_needed(eps, 1 - c, kind) for c in confidences]
            lines.append(f"{eps}," + ",".join(str(k) for k in ks))
        text = "\n".join(lines) + "\n"
        sys.stdout.write(text)
        if args.out:
            rec = RunRecorder("samples-needed", args)
            rec.write("samples_needed.csv", text)
            rec.finish()
        return 0
    if args.epsilon is None or args.delta is None:
        raise UsageError("--epsilon and --delta are required unless --table is given")
    k = samples_needed(args.epsilon, args.delta, kind)
    print(k)
    if args.out:
        rec = RunRecorder("samples-needed", args)
        rec.write("samples_needed.json", json.dumps({"k": k, "epsilon": args.epsilon, "delta": args.delta, "bound_kind": kind}, indent=2))
        rec.finish()
    return 0


# --- shared source / sampling flags ----------------------------------------


def _add_source_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="series directory of step_<6-digit>.qf1/.txt files")
    src.add_argument("--scenario", help="builtin scenario name or path to scenario.json")
    p.add_argument("--alpha", type=_probability("--alpha"), default=0.94)
    p.add_argument("--beta", type=_probability("--beta"), default=0.98)
    p.add_argument("--gamma", type=_probability("--gamma"), default=0.01)
    p.add_argument("--k", type=_positive_int("--k"), help="global sample count")
    p.add_argument("--samples-per-rank", type=_positive_int("--samples-per-rank"))
    p.add_argument("--ranks", type=_positive_int("--ranks"), help=f"rank count (default {DEFAULT_RANKS} with --samples-per-rank)")
    p.add_argument("--epsilon", type=_probability("--epsilon"), default=0.01)
    p.add_argument("--delta", type=_probability("--delta"), default=0.001)
    p.add_argument("--cadence", type=_positive_int("--cadence"), help="evaluate every n-th timestep (default: once per recorded step)")
    p.add_argument("--exact", action="store_true", help="exact percentiles over every point")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output directory")


def _resolve(args):
    if args.seed is None:
        args.seed = _default_seed()
    if args.k is not None and args.samples_per_rank is not None:
        raise UsageError("--k and --samples-per-rank are mutually exclusive")
    if args.exact and (args.k is not None or args.samples_per_rank is not None):
        raise UsageError("--exact does not take --k or --samples-per-rank")
    params = IndicatorParams(args.alpha, args.beta, args.gamma)
    ranks = None
    if args.samples_per_rank is not None:
        ranks = args.ranks or DEFAULT_RANKS
        args.ranks = ranks
    if args.scenario:
        source = ScenarioSeries(load_scenario(args.scenario), ranks=ranks)
    else:
        source = FileSeries(args.input, ranks=ranks)
    sampling: dict = {"exact": args.exact, "seed": args.seed}
    budget_info = None
    if not args.exact:
        if args.samples_per_rank is not None:
            sampling["samples_per_rank"] = args.samples_per_rank
            budget_info = {"k": args.samples_per_rank * ranks, "samples_per_rank": args.samples_per_rank, "ranks": ranks}
        else:
            budget = (
                SampleBudget.of_size(args.k, P_INDICATOR, args.delta)
                if args.k is not None
                else SampleBudget.for_error(args.epsilon, args.delta, P_INDICATOR)
            )
            sampling["budget"] = budget
            budget_info = budget.as_dict()
    cadence = args.cadence or source.substeps
    args.cadence = cadence
    return source, params, sampling, budget_info, cadence


def cmd_indicator(args) -> int:
    source, params, sampling, budget_info, cadence = _resolve(args)
    points = list(indicator_series(source, params, cadence=cadence, **sampling))
    text = series_to_csv(points)
    rec = RunRecorder("indicator", args)
    rec.extra["budget"] = budget_info
    if rec.out:
        rec.write("indicator.csv", text)
        rec.finish()
    else:
        sys.stdout.write(text)
    if points and all(p.degenerate for p in points):
        raise DegenerateRangeError("every step had a degenerate percentile range")
    return 0


def cmd_trigger(args) -> int:
    if args.tau is not None and args.tau_range is not None:
        raise UsageError("--tau and --tau-range are mutually exclusive")
    source, params, sampling, budget_info, cadence = _resolve(args)
    rec = RunRecorder("trigger", args)
    rec.extra["budget"] = budget_info
    window = source.window
    if args.tau_range is not None:
        lo, hi = args.tau_range
        if not 0 < lo <= hi < 1:
            raise UsageError("--tau-range needs 0 < LO <= HI < 1")
        if window is None:
            raise UsageError("--tau-range studies need a source with a ground-truth window")
        study = trigger_variability_study(
            source,
            params,
            budget=sampling.get("budget"),
            samples_per_rank=sampling.get("samples_per_rank"),
            exact=args.exact,
            realizations=args.realizations,
            tau_range=(lo, hi),
            confirm=args.confirm,
            cadence=cadence,
            seed=args.seed,
        )
        summary = study.summary()
        summary.update({"confirm": args.confirm, "cadence": cadence, "params": params.as_dict(), "budget": budget_info, "seed": args.seed})
        if rec.out:
            rec.write("study.csv", study.to_csv())
            rec.write("study_summary.json", json.dumps(summary, indent=2))
            rec.finish()
        print(json.dumps(summary, indent=2))
        return 0

    config = TriggerConfig(tau=args.tau if args.tau is not None else 0.8, confirm=args.confirm, cadence=cadence)
    points = []

    def tracked():
        for p in indicator_series(source, params, cadence=cadence, **sampling):
            points.append(p)
            yield p

    fired_t = detect_trigger(tracked(), replace(config, cadence=1))
    if points and all(p.degenerate for p in points):
        raise DegenerateRangeError("every step had a degenerate percentile range")
    report = TriggerReport(
        fired_timestep=fired_t,
        fired_step=source.recorded_step(fired_t),
        config=config,
        params=params,
        budget=budget_info,
        seed=None if args.exact else args.seed,
        window=(window.lo, window.hi) if window is not None else None,
    )
    text = report.to_json()
    if rec.out:
        rec.write("trigger.json", text)
        rec.finish()
    print(text)
    return 0


# --- error-study ------------------------------------------------------------


def cmd_error_study(args) -> int:
    if args.seed is None:
        args.seed = _default_seed()
    if args.input:
        field = load_snapshot(args.input)
    else:
        if args.step is None:
            raise UsageError("--scenario needs --step")
        spec = load_scenario(args.scenario)
        if not 0 <= args.step < spec.steps:
            raise UsageError(f"--step must be in [0, {spec.steps})")
        field = generate_snapshot(spec, args.step * spec.substeps).eager()
    reference = np.sort(field.values)
    rec = RunRecorder("error-study", args)
    summaries = {}
    print("k,runs,mean_abs,max_abs,q25,q50,q75")
    for k in args.k_list:
        stats = quantile_error_study(field, args.alpha, k, args.runs, args.seed, reference=reference)
        s = stats.summary()
        summaries[str(k)] = s
        print(f"{k},{s['runs']},{s['mean_abs']:.6g},{s['max_abs']:.6g},{s['q25']:.6g},{s['q50']:.6g},{s['q75']:.6g}")
        if rec.out:
            rec.write(f"errors_k{k}.csv", stats.to_csv())
    if rec.out:
        rec.write("summary.json", json.dumps(summaries, indent=2))
        rec.finish()
    return 0


# --- generate ---------------------------------------------------------------


def cmd_generate(args) -> int:
    spec = load_scenario(args.scenario)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"{out} exists and is not empty; pass --force to overwrite")
    steps = args.steps_subset if args.steps_subset is not None else list(range(spec.steps))
    bad = [s for s in steps if not 0 <= s < spec.steps]
    if bad:
        raise UsageError(f"--steps-subset entries out of range [0, {spec.steps}): {bad}")
    steps = sorted(set(steps))
    if out.exists() and args.force:
        for stale in list(out.glob("step_*.qf1")) + list(out.glob("step_*.txt")):
            stale.unlink()
    rec = RunRecorder("generate", args)
    rec.write("scenario.json", spec.to_json())
    for s in steps:
        values = generate_snapshot(spec, s * spec.substeps).materialize()
        if args.format == "txt":
            rec.write(step_filename(s, "txt"), "\n".join(repr(float(v)) for v in values) + "\n")
        else:
            rec.write(step_filename(s), encode_qf1(values))
    rec.extra["steps"] = steps
    rec.finish()
    print(f"wrote {len(steps)} snapshots to {out}")
    return 0


def cmd_scenario(args) -> int:
    spec = load_scenario(args.name)
    text = spec.to_json()
    if args.out:
        atomic_write(args.out, text + "\n")
    else:
        print(text)
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtrg", description="Percentile-sampling trigger detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("samples-needed", help="sample count for an (epsilon, delta) guarantee")
    p.add_argument("--epsilon", type=_probability("--epsilon"))
    p.add_argument("--delta", type=_probability("--delta"))
    p.add_argument("--bound", choices=["single", "pind", "single_percentile", "p_indicator"], default="single")
    p.add_argument("--table", action="store_true", help="print k over an epsilon grid at 90/99/99.9%% confidence")
    p.add_argument("--out")
    p.set_defaults(func=cmd_samples_needed)

    p = sub.add_parser("indicator", help="indicator CSV over a series")
    _add_source_flags(p)
    p.set_defaults(func=cmd_indicator)

    p = sub.add_parser("trigger", help="trigger report, or a variability study with --tau-range")
    _add_source_flags(p)
    p.add_argument("--tau", type=_probability("--tau"))
    p.add_argument("--tau-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--realizations", type=_positive_int("--realizations"), default=1)
    p.add_argument("--confirm", type=_positive_int("--confirm"), default=1)
    p.set_defaults(func=cmd_trigger)

    p = sub.add_parser("error-study", help="rank error of sampled percentiles over repeated runs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="snapshot file (.qf1 or .txt)")
    src.add_argument("--scenario")
    p.add_argument("--step", type=int, help="recorded step when using --scenario")
    p.add_argument("--alpha", type=_probability("--alpha"), default=0.94)
    p.add_argument("--k-list", type=_int_list, default=[12000, 24000, 48000])
    p.add_argument("--runs", type=_positive_int("--runs"), default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_error_study)

    p = sub.add_parser("generate", help="materialize scenario snapshots to a series directory")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps-subset", type=_step_list, help="comma-separated recorded steps")
    p.add_argument("--format", choices=["qf1", "txt"], default="qf1")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("scenario", help="print a scenario as JSON")
    p.add_argument("name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (InvalidArgumentError, InvalidPartitionError) as exc:
        print(f"qtrg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"qtrg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateRangeError as exc:
        print(f"qtrg: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
