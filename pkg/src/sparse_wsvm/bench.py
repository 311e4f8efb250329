"""Monte-Carlo benchmark harness: replicate, tune, fit, score, aggregate, report."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import N_INFORMATIVE, SimSpec, gen_gaussian_example, replicate_seed
from .pipelines import FitResult, PipelineSpec, run_pipeline
from .prob_est import classify
from .tuning import egkl, split_train_tune
from .wsvm_train import Dataset, TrainingError, class_pair_distances, grouping_bound_excess

log = logging.getLogger(__name__)

WORKERS_ENV = "SPARSE_WSVM_WORKERS"
TEST_SIZE_CAP = 5000
REPORT_SCHEMA = "sparse-wsvm-metrics/1"


class BenchmarkError(RuntimeError):
    """Every replicate of some method failed."""


@dataclass(frozen=True, eq=False)
class RealSource:
    """Fixed training pool (halved per replicate into train/tune) and test set."""

    name: str
    train_pool: Dataset
    test: Dataset


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    source: SimSpec | RealSource
    methods: tuple
    replicates: int = 20
    test_size: int | None = None
    output_path: str | None = None
    root_seed: int = 0
    audit_grouping: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.methods:
            raise ValueError("at least one method is required")

    @property
    def simulated(self) -> bool:
        return isinstance(self.source, SimSpec)

    def resolved_test_size(self) -> int:
        if self.test_size is not None:
            return int(self.test_size)
        return min(50 * self.source.n, TEST_SIZE_CAP)


@dataclass(frozen=True)
class Stat:
    mean: float
    se: float | None  # None when there is a single replicate

    @classmethod
    def of(cls, values) -> "Stat":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return cls(math.nan, None)
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else None
        return cls(float(np.mean(v)), se)


@dataclass(frozen=True, eq=False)
class ReplicateOutcome:
    method: str
    replicate: int
    time_seconds: float
    egkl: float
    test_error: float
    q_s: int | None
    q_n: int | None
    frequency: np.ndarray
    m: int
    p_min: float
    p_max: float
    lambdas: tuple = ()
    grouping_excess: float | None = None  # worst over audited elastic-net models
    grouping_models: int = 0


@dataclass(frozen=True, eq=False)
class MetricsRow:
    method: str
    n: int
    p: int
    time_minutes: Stat
    egkl: Stat
    test_error: Stat
    q_s: Stat | None
    q_n: Stat | None
    frequency_map: np.ndarray
    replicates: int
    failed: int = 0
    failures: tuple = field(default=())


# ---------------------------------------------------------------- replicates


def _replicate_data(config: ExperimentConfig, r: int):
    """``(train, tune, test)`` for replicate ``r``; identical across methods."""
    if config.simulated:
        spec = config.source
        tr = gen_gaussian_example(spec.with_seed(replicate_seed(config.root_seed, r, 0)))
        tu = gen_gaussian_example(spec.with_seed(replicate_seed(config.root_seed, r, 1)))
        te = gen_gaussian_example(
            spec.with_seed(replicate_seed(config.root_seed, r, 2), n=config.resolved_test_size())
        )
        return tr.dataset, tu.dataset, te.dataset
    pool = config.source.train_pool
    train, tune = split_train_tune(pool, replicate_seed(config.root_seed, r, 0)).apply(pool)
    return train, tune, config.source.test


def score_fit(fit: FitResult, test: Dataset, true_features: int | None):
    est = fit.probability_model.estimate(test.features)
    te = float(np.mean(classify(est) != test.labels))
    q_s = q_n = None
    if true_features is not None:
        q_s = int(np.sum(fit.final_variables < true_features))
        q_n = int(fit.final_variables.size - q_s)
    return egkl(est, test.labels), te, q_s, q_n, float(est.values.min()), float(est.values.max())


class GroupingAudit:
    """Worst grouping-bound excess over every elastic-net model it is shown."""

    def __init__(self):
        self.worst = 0.0
        self.count = 0
        self._cache = (None, None)

    def __call__(self, data: Dataset, model):
        if self._cache[0] is not data:
            self._cache = (data, class_pair_distances(data))
        self.worst = max(self.worst, grouping_bound_excess(data, model, self._cache[1]))
        self.count += 1


def run_replicate(config: ExperimentConfig, method: PipelineSpec, r: int) -> ReplicateOutcome:
    train, tune, test = _replicate_data(config, r)
    en = method.method.en_form is not None and not method.method.two_stage
    audit = GroupingAudit() if config.audit_grouping and en else None
    fit = run_pipeline(method, train, tune, audit=audit)
    true_features = N_INFORMATIVE if config.simulated else None
    e, te, q_s, q_n, lo, hi = score_fit(fit, test, true_features)
    return ReplicateOutcome(
        method.method.value, r, fit.wall_time, e, te, q_s, q_n,
        fit.frequency, fit.m, lo, hi, fit.lambdas,
        audit.worst if audit else None, audit.count if audit else 0,
    )


def _task(args):
    config, method, r = args
    try:
        return run_replicate(config, method, r)
    except TrainingError as exc:
        return f"replicate {r}: {exc}"


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def aggregate(method: str, n: int, p: int, outcomes, failures=()) -> MetricsRow:
    """Means and standard errors over the successful replicates, in replicate order."""
    outcomes = sorted(outcomes, key=lambda o: o.replicate)
    if not outcomes:
        raise BenchmarkError(f"{method}: all replicates failed ({len(failures)})")
    has_q = outcomes[0].q_s is not None
    return MetricsRow(
        method, n, p,
        Stat.of([o.time_seconds / 60.0 for o in outcomes]),
        Stat.of([o.egkl for o in outcomes]),
        Stat.of([o.test_error for o in outcomes]),
        Stat.of([o.q_s for o in outcomes]) if has_q else None,
        Stat.of([o.q_n for o in outcomes]) if has_q else None,
        np.mean([o.frequency for o in outcomes], axis=0),
        len(outcomes),
        len(failures),
        tuple(failures),
    )


def run_benchmark_detailed(config: ExperimentConfig, workers: int | None = None):
    """Rows plus the per-replicate outcomes behind them."""
    workers = worker_count() if workers is None else workers
    tasks = [(config, m, r) for m in config.methods for r in range(config.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    if config.simulated:
        n, p = config.source.n, config.source.p
    else:
        n, p = config.source.train_pool.n, config.source.train_pool.p
    rows, detail = [], {}
    for i, method in enumerate(config.methods):
        chunk = results[i * config.replicates : (i + 1) * config.replicates]
        ok = [c for c in chunk if isinstance(c, ReplicateOutcome)]
        bad = [c for c in chunk if isinstance(c, str)]
        if bad:
            log.warning("%s: %d of %d replicates failed", method.method.value, len(bad), len(chunk))
        rows.append(aggregate(method.method.value, n, p, ok, bad))
        detail[method.method.value] = ok
    if config.output_path:
        emit_report(rows, config.output_path)
    return rows, detail


def run_benchmark(config: ExperimentConfig, workers: int | None = None) -> list[MetricsRow]:
    return run_benchmark_detailed(config, workers)[0]


# ---------------------------------------------------------------- reports


def _stat_dict(stat: Stat | None):
    if stat is None:
        return None
    return {"mean": stat.mean, "se": stat.se}


def row_to_dict(row: MetricsRow) -> dict:
    return {
        "method": row.method,
        "n": row.n,
        "p": row.p,
        "time_minutes": _stat_dict(row.time_minutes),
        "egkl": _stat_dict(row.egkl),
        "test_error": _stat_dict(row.test_error),
        "q_selected_true": _stat_dict(row.q_s),
        "q_selected_noise": _stat_dict(row.q_n),
        "frequency_map": [float(v) for v in row.frequency_map],
        "replicates": row.replicates,
        "failed_replicates": row.failed,
        "failures": list(row.failures),
    }


def _stat_from(d):
    return None if d is None else Stat(d["mean"], d["se"])


def row_from_dict(d: dict) -> MetricsRow:
    return MetricsRow(
        d["method"], d["n"], d["p"],
        _stat_from(d["time_minutes"]), _stat_from(d["egkl"]), _stat_from(d["test_error"]),
        _stat_from(d["q_selected_true"]), _stat_from(d["q_selected_noise"]),
        np.asarray(d["frequency_map"], dtype=float), d["replicates"],
        d["failed_replicates"], tuple(d["failures"]),
    )


def _fmt(stat: Stat | None, scale: float = 1.0, digits: int = 1) -> str:
    if stat is None:
        return "-"
    text = f"{stat.mean * scale:.{digits}f}"
    if stat.se is not None:
        text += f" ({stat.se * scale:.{digits}f})"
    return text


def format_table(rows) -> str:
    header = ["Method", "n", "p", "Time (min)", "EGKL x100", "TE x100", "q_S", "q_N", "N"]
    body = [
        [
            r.method, str(r.n), str(r.p),
            _fmt(r.time_minutes, digits=2), _fmt(r.egkl, 100.0), _fmt(r.test_error, 100.0),
            _fmt(r.q_s, digits=2), _fmt(r.q_n, digits=2), str(r.replicates),
        ]
        for r in rows
    ]
    widths = [max(len(c) for c in col) for col in zip(header, *body)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_paths(path) -> tuple[Path, Path]:
    path = Path(path)
    base = path.with_suffix("") if path.suffix == ".json" else path
    return base.with_suffix(".json"), base.with_suffix(".txt")


def emit_report(rows, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` (unscaled values) and ``<path>.txt`` (x100 table)."""
    json_path, text_path = report_paths(path)
    doc = {"schema": REPORT_SCHEMA, "rows": [row_to_dict(r) for r in rows]}
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
    text_path.write_text(format_table(rows))
    return json_path, text_path


def read_report(path) -> list[MetricsRow]:
    json_path, _ = report_paths(path)
    doc = json.loads(json_path.read_text())
    if doc.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"{json_path}: unknown schema {doc.get('schema')!r}")
    return [row_from_dict(d) for d in doc["rows"]]
