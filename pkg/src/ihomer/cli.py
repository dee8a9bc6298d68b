"""Command line entry point: ``ihomer run`` and ``ihomer compare``."""
from __future__ import annotations

import argparse
import json
import sys
import typing
from dataclasses import fields

from .baselines import LEARNERS
from .benchmark import RunConfig, ReportSchemaError, compare_runs, format_table, run_benchmark, write_comparison
from .io import DatasetError, LabelSpec, SyntheticSpec
from .model import IhomerConfig

_HELP = {
    "n_min": "grace period between split, merge and replacement tests",
    "delta_cluster": "confidence parameter of the label-cluster split and merge tests",
    "tau_cluster": "tie threshold for label-cluster splits",
    "delta_tree": "confidence parameter of tree splits",
    "tau_tree": "tie threshold for tree splits",
    "delta_alt_tree": "error margin for subtree replacement or pruning",
    "delta_alt_cluster": "significance level for swapping label hierarchies",
    "adwin_delta": "ADWIN confidence inside the trees",
    "hierarchy_adwin_delta": "ADWIN confidence on the ensemble subset error",
    "drift_signals": "consecutive error-rise signals before an alternate hierarchy is grown",
    "signal_memory": "quiet instances after which the signal count restarts",
    "freeze_partition_after": "stop restructuring the label partition after this many instances",
}


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model hyperparameters (override --config)")
    hints = typing.get_type_hints(IhomerConfig)
    for f in fields(IhomerConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = hints[f.name]
        if kind is bool:
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None,
                           help=_HELP.get(f.name))
        else:
            base = int if kind in (int, typing.Optional[int]) else float
            g.add_argument(flag, dest=f.name, type=base, default=None, metavar=base.__name__.upper(),
                           help=_HELP.get(f.name))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ihomer", description="Online multi-label benchmark runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="prequential evaluation of one learner on one stream")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", help="ARFF or CSV file")
    src.add_argument("--synthetic-spec", help="JSON file describing a synthetic stream")
    run.add_argument("--labels-xml", help="companion label XML for an ARFF dataset")
    run.add_argument("--n-labels", type=int, help="number of label attributes (ARFF or CSV)")
    run.add_argument("--label-position", choices=("first", "last"), default="last")
    run.add_argument("--label-prefix", help="label attributes are those whose name starts with this")
    run.add_argument("--nominal", choices=("onehot", "index"), default="onehot",
                     help="encoding of nominal features")
    run.add_argument("--learner", choices=LEARNERS, default="ihomer")
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--rolling-window", type=int, default=500)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", help="flat JSON document of model hyperparameters")
    _add_model_flags(run)

    cmp_ = sub.add_parser("compare", help="tabulate and rank several run reports")
    cmp_.add_argument("reports", nargs="+", help="report.json files or run directories")
    cmp_.add_argument("--out", help="directory for compare.csv, summary.csv and compare.png")
    return parser


def _model_config(args) -> IhomerConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(json.load(fh))
    for f in fields(IhomerConfig):
        v = getattr(args, f.name)
        if v is not None:
            values[f.name] = v
    return IhomerConfig.from_dict(values)


def _run_config(args) -> RunConfig:
    synthetic = None
    if args.synthetic_spec:
        with open(args.synthetic_spec) as fh:
            synthetic = SyntheticSpec.from_dict(json.load(fh))
    if args.labels_xml:
        label_spec = LabelSpec(xml=args.labels_xml)
    elif args.label_prefix:
        label_spec = LabelSpec(prefix=args.label_prefix)
    elif args.n_labels is not None:
        label_spec = LabelSpec(count=args.n_labels, position=args.label_position)
    else:
        label_spec = LabelSpec()
    return RunConfig(
        learner=args.learner,
        seed=args.seed,
        dataset=args.dataset,
        synthetic=synthetic,
        label_spec=label_spec,
        n_labels=args.n_labels,
        nominal=args.nominal,
        rolling_window=args.rolling_window,
        out=args.out,
        model=_model_config(args),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            doc = run_benchmark(_run_config(args))
            m = doc["metrics"]
            print(f"{doc['learner']} on {doc['dataset']['name']}: {doc['n_instances']} instances, "
                  + ", ".join(f"{k}={m[k]:.4f}" for k in sorted(m)))
            print(f"wrote {args.out}/report.json, rolling.csv, rolling.png, config.json, runtime.json")
        else:
            comp = compare_runs(args.reports)
            print(format_table(comp))
            if args.out:
                write_comparison(comp, args.out)
                print(f"wrote {args.out}/compare.csv, summary.csv, compare.png")
    except (DatasetError, ReportSchemaError, FileNotFoundError, KeyError, ValueError, TypeError,
            json.JSONDecodeError) as exc:
        print(f"ihomer: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
