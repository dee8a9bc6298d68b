"""Prequential benchmark runs and cross-run comparison."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
from scipy.stats import rankdata

from .baselines import LEARNERS, IhomerLearner, make_learner
from .io import (DatasetMeta, LabelSpec, SyntheticSpec, generate_synthetic, label_statistics, load_arff,
                 load_csv, synthetic_meta)
from .metrics import PrequentialState, prequential_update, report, rolling_series, write_rolling_csv
from .model import IhomerConfig
from .plotting import plot_comparison, plot_rolling

SCHEMA_VERSION = 1
METRICS = ("subset_accuracy", "sample_accuracy", "hamming_loss", "micro_f1", "macro_f1")
LOWER_IS_BETTER = {"hamming_loss"}

_nullable_number = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ihomer run report",
    "type": "object",
    "required": ["schema_version", "learner", "seed", "rolling_window", "dataset", "n_instances",
                 "metrics", "final_rolling_sample_accuracy", "structure", "model"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "learner": {"enum": list(LEARNERS)},
        "seed": {"type": "integer"},
        "rolling_window": {"type": "integer", "minimum": 1},
        "n_instances": {"type": "integer", "minimum": 0},
        "dataset": {
            "type": "object",
            "required": ["name", "n_instances", "n_features", "n_labels", "cardinality", "density", "mean_ir",
                         "temporally_ordered"],
            "properties": {
                "name": {"type": "string"},
                "n_instances": {"type": "integer"},
                "n_features": {"type": "integer"},
                "n_labels": {"type": "integer"},
                "cardinality": _nullable_number,
                "density": _nullable_number,
                "mean_ir": _nullable_number,
                "temporally_ordered": {"type": "boolean"},
            },
        },
        "metrics": {
            "type": "object",
            "required": list(METRICS),
            "additionalProperties": False,
            "properties": {m: {"type": "number", "minimum": 0, "maximum": 1} for m in METRICS},
        },
        "final_rolling_sample_accuracy": _nullable_number,
        "structure": {
            "type": "object",
            "required": ["final_size", "peak_size"],
            "properties": {"final_size": {"type": "integer"}, "peak_size": {"type": "integer"}},
        },
        "model": {"type": "object"},
    },
}


class ReportSchemaError(ValueError):
    pass


def validate_report(doc: dict) -> None:
    try:
        jsonschema.validate(doc, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ReportSchemaError(f"report does not match schema v{SCHEMA_VERSION}: {exc.message}") from exc


@dataclass
class RunConfig:
    learner: str = "ihomer"
    seed: int = 0
    dataset: str | None = None
    synthetic: SyntheticSpec | None = None
    label_spec: LabelSpec = field(default_factory=LabelSpec)
    n_labels: int | None = None  # CSV label count
    nominal: str = "onehot"
    rolling_window: int = 500
    out: str = "run"
    model: IhomerConfig = field(default_factory=IhomerConfig)

    def __post_init__(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise ValueError("give exactly one of a dataset path or a synthetic spec")
        if self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r}; choose from {', '.join(LEARNERS)}")
        if self.rolling_window < 1:
            raise ValueError("rolling window must be >= 1")

    def to_dict(self) -> dict:
        ls = self.label_spec
        return {
            "learner": self.learner,
            "seed": self.seed,
            "dataset": self.dataset,
            "synthetic": None if self.synthetic is None else self.synthetic.to_dict(),
            "label_spec": {
                "xml": None if ls.xml is None else str(ls.xml),
                "count": ls.count,
                "position": ls.position,
                "prefix": ls.prefix,
            },
            "n_labels": self.n_labels,
            "nominal": self.nominal,
            "rolling_window": self.rolling_window,
            "model": self.model.to_dict(),
        }


def open_source(cfg: RunConfig) -> tuple[DatasetMeta, list]:
    """Resolve the configured source into metadata and a materialised stream."""
    if cfg.synthetic is not None:
        spec = SyntheticSpec.from_dict({**cfg.synthetic.to_dict(), "seed": cfg.seed})
        instances = list(generate_synthetic(spec))
        card, dens, mean_ir = label_statistics([i.labels for i in instances], spec.n_labels)
        meta = synthetic_meta(spec)
        meta = DatasetMeta(meta.name, len(instances), meta.n_features, meta.n_labels, card, dens, mean_ir, True)
        return meta, instances
    path = Path(cfg.dataset)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    if path.suffix.lower() == ".csv":
        if cfg.n_labels is None:
            raise ValueError("CSV datasets need the number of trailing label columns")
        meta, it = load_csv(path, cfg.n_labels)
    else:
        meta, it = load_arff(path, cfg.label_spec, nominal=cfg.nominal)
    return meta, list(it)


def _finite(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v


def prequential_run(learner, instances, n_labels: int, window: int):
    """Test-then-train over ``instances``; returns the evaluator state and peak structure size."""
    state = PrequentialState(n_labels, window=window)
    peak = 0
    for inst in instances:
        pred = learner.predict_learn_one(inst.features, inst.labels)
        prequential_update(state, inst.labels, pred)
        peak = max(peak, learner.structure_size())
    return state, peak


def run_benchmark(cfg: RunConfig) -> dict:
    """Run one prequential evaluation and write its files into ``cfg.out``.

    Returns the report document.  ``report.json`` is a pure function of the
    configuration; timings go to ``runtime.json``.
    """
    meta, instances = open_source(cfg)
    learner = make_learner(cfg.learner, meta.n_labels, cfg.model, meta.n_features)
    start = time.perf_counter()
    state, peak = prequential_run(learner, instances, meta.n_labels, cfg.rolling_window)
    elapsed = time.perf_counter() - start

    series = rolling_series(state, cfg.rolling_window)
    metrics = report(state).to_dict() if state.n else {m: 0.0 for m in METRICS}
    model_info: dict = {}
    events = ()
    if isinstance(learner, IhomerLearner):
        m = learner.model
        events = [(at, kind) for at, kind in m.events if kind != "remap"]
        model_info = {
            "partition": [list(c) for c in m.partition],
            "swaps": m.n_swaps,
            "alternates_spawned": m.n_spawns,
            "events": [[at, kind] for at, kind in events],
        }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "learner": cfg.learner,
        "seed": cfg.seed,
        "rolling_window": cfg.rolling_window,
        "dataset": {k: _finite(v) for k, v in meta.summary().items()},
        "n_instances": state.n,
        "metrics": metrics,
        "final_rolling_sample_accuracy": float(series[-1]) if len(series) else None,
        "structure": {"final_size": int(learner.structure_size()), "peak_size": int(peak)},
        "model": model_info,
    }
    validate_report(doc)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "runtime.json").write_text(json.dumps({
        "wall_clock_seconds": elapsed,
        "instances_per_second": state.n / elapsed if elapsed > 0 else None,
        "peak_structure_size": int(peak),
    }, indent=2) + "\n")
    write_rolling_csv(out / "rolling.csv", series, cfg.rolling_window)
    plot_rolling(out / "rolling.png", series, cfg.rolling_window,
                 title=f"{cfg.learner} on {meta.name}", events=events)
    return doc


def load_report(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    with open(path) as fh:
        doc = json.load(fh)
    validate_report(doc)
    return doc


@dataclass
class Comparison:
    runs: list[str]
    datasets: list[str]
    learners: list[str]
    values: np.ndarray  # (runs, metrics)
    ranks: np.ndarray  # (runs, metrics), within each dataset, 1 = best
    learner_means: dict[str, dict[str, float]]
    learner_mean_ranks: dict[str, dict[str, float]]


def compare_runs(paths) -> Comparison:
    """Per-metric table over reports, with average ranks inside each dataset."""
    paths = list(paths)
    if len(paths) < 2:
        raise ValueError("comparison needs at least two reports")
    docs = [load_report(p) for p in paths]
    datasets = [d["dataset"]["name"] for d in docs]
    learners = [d["learner"] for d in docs]
    runs = [f"{l}@{d}" for l, d in zip(learners, datasets)]
    values = np.array([[d["metrics"][m] for m in METRICS] for d in docs], dtype=float)
    ranks = np.zeros_like(values)
    for name in dict.fromkeys(datasets):
        rows = [i for i, d in enumerate(datasets) if d == name]
        for j, metric in enumerate(METRICS):
            col = values[rows, j]
            ranks[rows, j] = rankdata(col if metric in LOWER_IS_BETTER else -col, method="average")
    means, mean_ranks = {}, {}
    for name in dict.fromkeys(learners):
        rows = [i for i, l in enumerate(learners) if l == name]
        means[name] = {m: float(values[rows, j].mean()) for j, m in enumerate(METRICS)}
        mean_ranks[name] = {m: float(ranks[rows, j].mean()) for j, m in enumerate(METRICS)}
    return Comparison(runs, datasets, learners, values, ranks, means, mean_ranks)


def write_comparison(comp: Comparison, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "dataset", "learner", *METRICS, *(f"rank_{m}" for m in METRICS)])
        for i, run in enumerate(comp.runs):
            w.writerow([run, comp.datasets[i], comp.learners[i],
                        *(repr(float(v)) for v in comp.values[i]), *(repr(float(r)) for r in comp.ranks[i])])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["learner", *(f"mean_{m}" for m in METRICS), *(f"mean_rank_{m}" for m in METRICS)])
        for name in comp.learner_means:
            w.writerow([name, *(repr(comp.learner_means[name][m]) for m in METRICS),
                        *(repr(comp.learner_mean_ranks[name][m]) for m in METRICS)])
    learners = list(comp.learner_means)
    plot_comparison(out / "compare.png", list(METRICS), learners,
                    [[comp.learner_means[l][m] for m in METRICS] for l in learners])


def format_table(comp: Comparison) -> str:
    head = f"{'run':<48}" + "".join(f"{m:>17}" for m in METRICS)
    lines = [head, "-" * len(head)]
    for i, run in enumerate(comp.runs):
        cells = "".join(f"{v:>11.4f} ({r:>3.1f})" for v, r in zip(comp.values[i], comp.ranks[i]))
        lines.append(f"{run:<48}{cells}")
    return "\n".join(lines)
