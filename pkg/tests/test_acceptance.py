"""End-to-end acceptance checks.

Each test prints a single PASS/FAIL line (collected again in the pytest
terminal summary) and then asserts.  Run directly with
``python tests/test_acceptance.py`` for the verdict lines alone.

The real-data check reads ``flags.arff`` and ``emotions.arff`` (with optional
``flags.xml`` / ``emotions.xml`` label files) from ``$IHOMER_DATA_DIR``,
defaulting to ``data/`` at the repository root.
"""
import filecmp
import math
import os
import time
from pathlib import Path

import mpmath
import numpy as np

from ihomer.baselines import IhomerLearner, MajorityLabelset, SingleMlhat
from ihomer.benchmark import RunConfig, prequential_run, run_benchmark
from ihomer.clustering import ClusterHierarchy, balanced_partition
from ihomer.core import LabelSet
from ihomer.drift import ErrorSummary, hoeffding_epsilon, hoeffding_epsilon_tree, welch_t
from ihomer.io import (DriftEvent, LabelSpec, SyntheticSpec, correlation_flip_spec, generate_synthetic,
                       load_arff, pair_block_derangement)
from ihomer.metrics import PrequentialState, prequential_update, report, rolling_series
from ihomer.model import IhomerConfig, IhomerModel

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("IHOMER_DATA_DIR", ROOT / "data"))


# ---------------------------------------------------------------- metric oracle

def batch_metrics(Y: np.ndarray, P: np.ndarray) -> dict:
    """Direct evaluation from whole indicator matrices."""
    n, L = Y.shape
    Y, P = Y.astype(bool), P.astype(bool)
    inter = (Y & P).sum(1)
    union = (Y | P).sum(1)
    sample = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
    tp = (Y & P).sum(0)
    ty, tp_pred = Y.sum(0), P.sum(0)
    per_label = np.where(ty + tp_pred == 0, 0.0, 2 * tp / np.maximum(ty + tp_pred, 1))
    micro_den = ty.sum() + tp_pred.sum()
    return {
        "subset_accuracy": float(np.all(Y == P, axis=1).mean()),
        "sample_accuracy": float(sample.mean()),
        "hamming_loss": float((Y != P).sum() / (n * L)),
        "micro_f1": 0.0 if micro_den == 0 else float(2 * tp.sum() / micro_den),
        "macro_f1": float(per_label.mean()),
    }


def to_labelset(row) -> LabelSet:
    return LabelSet(tuple(int(i) for i in np.flatnonzero(row)))


def test_metric_oracle_equivalence(verdict):
    rng = np.random.default_rng(20240611)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        L = int(rng.integers(1, 31))
        density = rng.uniform(0.02, 0.6)
        Y = rng.random((500, L)) < density
        # predictions: noisy copies so every metric takes non-trivial values
        P = np.where(rng.random((500, L)) < rng.uniform(0.0, 0.5), ~Y, Y)
        state = PrequentialState(L, window=50)
        for y, p in zip(Y, P):
            prequential_update(state, to_labelset(y), to_labelset(p))
        got = report(state).to_dict()
        want = batch_metrics(Y, P)
        worst = max(worst, max(abs(got[k] - want[k]) for k in want))
        rolling = rolling_series(state, 50)
        inter = (Y & P).sum(1)
        union = (Y | P).sum(1)
        per = np.where(union == 0, 1.0, inter / np.maximum(union, 1))
        ref = np.array([per[k:k + 50].mean() for k in range(len(per) - 49)])
        worst = max(worst, float(np.max(np.abs(rolling - ref))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 30
    verdict("metric oracle equivalence", ok, f"max abs diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- partition invariant

def _invariant_stream(i: int, n: int = 10_000):
    """Label streams built to drive splits, re-aggregations and balanced cuts."""
    kind = i % 3
    if kind == 0:
        # pair blocks reshuffled twice: clusters split, then merge back and re-split
        flip = pair_block_derangement(3)
        spec = SyntheticSpec(n_labels=6, n_instances=n, seed=i, block_activation="independent",
                             drifts=(DriftEvent(n // 3, permutation=flip), DriftEvent(2 * n // 3, permutation=flip)))
        return 6, [inst.labels for inst in generate_synthetic(spec)]
    if kind == 1:
        # triples with modal label-set size 3: pairs and singletons are cut away
        spec = SyntheticSpec(n_labels=9, n_instances=n, seed=i, blocks=((0, 1, 2), (3, 4, 5), (6, 7, 8)),
                             within_similarity=0.95, drifts=(DriftEvent(n // 2, swap=(2, 3)),))
        return 9, [inst.labels for inst in generate_synthetic(spec)]
    # unstructured label sets over a label space that keeps growing
    rng = np.random.default_rng(i)
    L = int(rng.integers(3, 12))
    out = []
    for t in range(n):
        top = max(1, min(L, 1 + t * L // (n // 2)))
        k = int(rng.integers(0, min(top, 4) + 1))
        out.append(LabelSet(tuple(sorted(rng.choice(top, k, replace=False).tolist()))))
    return 1, out


def _is_partition(clusters, n_labels) -> bool:
    flat = [label for c in clusters for label in c]
    return len(flat) == len(set(flat)) and set(flat) == set(range(n_labels)) and all(clusters)


def test_partition_invariant(verdict):
    start = time.perf_counter()
    violations = splits = merges = cuts = steps = 0
    for i in range(50):
        n_labels, stream = _invariant_stream(i)
        h = ClusterHierarchy(n_labels, n_min=50)
        for y in stream:
            h.learn_one(y)
            steps += 1
            leaves = h.leaves()
            cut = balanced_partition(h, h.stats.size_histogram)
            if not (_is_partition(leaves, h.n_labels) and _is_partition(cut, h.n_labels)):
                violations += 1
            cuts += len(cut) != len(leaves)
        splits += h.n_splits
        merges += h.n_merges
    elapsed = time.perf_counter() - start
    ok = violations == 0 and splits > 0 and merges > 0 and cuts > 0 and elapsed < 60
    verdict("partition invariant", ok,
            f"{steps} steps, {violations} violations, {splits} splits, {merges} merges, "
            f"{cuts} balanced cuts, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- bounds

WELCH_REFERENCE = [
    # (mean_a, var_a, n_a, mean_b, var_b, n_b, t, dof) evaluated at 40 digits
    (0.4, 0.04, 100, 0.3, 0.09, 100, 2.773500981126145610, 172.48453608247422680),
]


def _mp_welch(a: ErrorSummary, b: ErrorSummary):
    sa = mpmath.mpf(a.variance) / a.count
    sb = mpmath.mpf(b.variance) / b.count
    t = (mpmath.mpf(a.mean) - mpmath.mpf(b.mean)) / mpmath.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa ** 2 / (a.count - 1) + sb ** 2 / (b.count - 1))
    return t, dof


def test_bound_formulas(verdict):
    mpmath.mp.dps = 50
    rng = np.random.default_rng(7)
    worst_h = worst_tree = 0.0
    for _ in range(10_000):
        R = float(rng.uniform(0.01, 10.0))
        delta = float(10 ** rng.uniform(-12, -1e-3))
        n = int(rng.integers(1, 10_000_000))
        ref = mpmath.sqrt(mpmath.mpf(R) ** 2 * mpmath.log(1 / mpmath.mpf(delta)) / (2 * n))
        worst_h = max(worst_h, abs(hoeffding_epsilon(R, delta, n) - float(ref)))
        k = int(rng.integers(2, 1_000_000))
        ref_t = mpmath.sqrt(mpmath.log(k, 2) ** 2 * mpmath.log(1 / mpmath.mpf(delta)) / (2 * n))
        worst_tree = max(worst_tree, abs(hoeffding_epsilon_tree(k, delta, n) - float(ref_t)))

    worst_w = 0.0
    for ma, va, na, mb, vb, nb, t_ref, dof_ref in WELCH_REFERENCE:
        t, dof = welch_t(ErrorSummary(ma, va, na), ErrorSummary(mb, vb, nb))
        worst_w = max(worst_w, abs(t - t_ref) / abs(t_ref), abs(dof - dof_ref) / dof_ref)
    for _ in range(10_000):
        a = ErrorSummary(float(rng.random()), float(rng.uniform(1e-6, 0.25)), int(rng.integers(2, 5000)))
        b = ErrorSummary(float(rng.random()), float(rng.uniform(1e-6, 0.25)), int(rng.integers(2, 5000)))
        t, dof = welch_t(a, b)
        t_ref, dof_ref = _mp_welch(a, b)
        if t_ref != 0:
            worst_w = max(worst_w, float(abs((t - t_ref) / t_ref)))
        worst_w = max(worst_w, float(abs((dof - dof_ref) / dof_ref)))
    ok = worst_h <= 1e-12 and worst_tree <= 1e-12 and worst_w <= 1e-9
    verdict("bound formulas", ok,
            f"hoeffding {worst_h:.1e}, tree {worst_tree:.1e} abs; welch {worst_w:.1e} rel")
    assert ok


# ---------------------------------------------------------------- clustering on known blocks

def test_clustering_recovers_blocks(verdict):
    start = time.perf_counter()
    hits, first = 0, []
    for seed in range(5):
        spec = SyntheticSpec(n_labels=4, n_instances=5000, seed=seed, within_similarity=0.9, cross_similarity=0.05)
        model = IhomerModel(4)
        reached = None
        for i, inst in enumerate(generate_synthetic(spec)):
            model.predict_learn_one(inst.features, inst.labels)
            if reached is None and sorted(model.partition) == [(0, 1), (2, 3)]:
                reached = i + 1
        hits += sorted(model.partition) == [(0, 1), (2, 3)]
        first.append(reached)
    elapsed = time.perf_counter() - start
    ok = hits >= 4 and elapsed < 20
    verdict("clustering recovers ground-truth blocks", ok,
            f"{hits}/5 seeds, first reached at {first}, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- drift recovery

def _rolling_tail(config: IhomerConfig, spec: SyntheticSpec, window=500, start=7500) -> float:
    model = IhomerModel(spec.n_labels, config)
    state = PrequentialState(spec.n_labels, window=window)
    for inst in generate_synthetic(spec):
        pred, _ = model.predict_learn_one(inst.features, inst.labels)
        prequential_update(state, inst.labels, pred)
    series = rolling_series(state, window)
    # entry k ends at instance k + window - 1
    return float(series[start - window + 1:].mean())


def test_drift_recovery(verdict):
    start = time.perf_counter()
    gaps = []
    for seed in range(5):
        spec = correlation_flip_spec(seed, n_instances=10_000, position=5_000)
        adaptive = _rolling_tail(IhomerConfig(), spec)
        frozen = _rolling_tail(IhomerConfig(freeze_partition_after=5_000), spec)
        gaps.append(adaptive - frozen)
    elapsed = time.perf_counter() - start
    wins = sum(g >= 0.05 for g in gaps)
    ok = wins >= 4 and elapsed < 120
    verdict("drift recovery beats frozen partition", ok,
            f"gaps {[round(g, 3) for g in gaps]}, {wins}/5 >= 0.05, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- degenerate partition

def test_single_cluster_equivalence(verdict):
    spec = SyntheticSpec(n_labels=5, n_instances=10_000, seed=11, blocks=((0, 1), (2, 3, 4)),
                         drifts=(DriftEvent(4000, affected="both"),))
    model = IhomerModel(5, IhomerConfig(clustering=False))
    tree = SingleMlhat(5, IhomerConfig().tree_config())
    mismatches = 0
    for inst in generate_synthetic(spec):
        a, _ = model.predict_learn_one(inst.features, inst.labels)
        b = tree.predict_learn_one(inst.features, inst.labels)
        mismatches += a != b
    ok = mismatches == 0 and model.partition == [(0, 1, 2, 3, 4)]
    verdict("single-cluster equivalence with a lone tree", ok, f"{mismatches} mismatches over 10000")
    assert ok


# ---------------------------------------------------------------- small real datasets

def _find_dataset(name: str):
    arff = DATA_DIR / f"{name}.arff"
    if not arff.is_file():
        return None, None
    xml = DATA_DIR / f"{name}.xml"
    return arff, xml if xml.is_file() else None


def test_small_real_datasets(verdict):
    expected = {"flags": (194, 7), "emotions": (593, 6)}
    details, ok = [], True
    for name, (n_expected, n_labels) in expected.items():
        arff, xml = _find_dataset(name)
        if arff is None:
            ok = False
            details.append(f"{name}: missing {DATA_DIR / (name + '.arff')}")
            continue
        spec = LabelSpec(xml=xml) if xml else LabelSpec(count=n_labels)
        meta, stream = load_arff(arff, spec)
        instances = list(stream)
        t0 = time.perf_counter()
        state, _ = prequential_run(IhomerLearner(meta.n_labels, IhomerConfig(), meta.n_features), instances,
                                   meta.n_labels, 50)
        elapsed = time.perf_counter() - t0
        base, _ = prequential_run(MajorityLabelset(meta.n_labels), instances, meta.n_labels, 50)
        acc, floor = report(state).subset_accuracy, report(base).subset_accuracy
        good = (len(instances) == n_expected and meta.n_labels == n_labels and elapsed < 5 and acc >= floor)
        ok &= good
        details.append(f"{name}: n={len(instances)} L={meta.n_labels} subset acc {acc:.3f} "
                       f"vs majority {floor:.3f}, {elapsed:.2f}s")
    verdict("small real datasets", ok, "; ".join(details))
    assert ok


# ---------------------------------------------------------------- determinism

def _tiny_arff(path: Path):
    rng = np.random.default_rng(3)
    lines = ["@relation tiny", "@attribute f0 numeric", "@attribute f1 numeric", "@attribute colour {r,g,b}",
             "@attribute l0 {0,1}", "@attribute l1 {0,1}", "@attribute l2 {0,1}", "@data"]
    for _ in range(400):
        x = rng.random(2)
        c = "rgb"[int(rng.integers(3))]
        y = [int(x[0] > 0.5), int(x[0] > 0.5 and rng.random() < 0.9), int(c == "b")]
        lines.append(f"{x[0]:.5f},{x[1]:.5f},{c}," + ",".join(map(str, y)))
    path.write_text("\n".join(lines) + "\n")


def test_determinism(verdict, tmp_path):
    arff = tmp_path / "tiny.arff"
    _tiny_arff(arff)
    synthetic = SyntheticSpec(n_labels=4, n_instances=3000, drifts=(DriftEvent(1500),))
    configs = [RunConfig(learner=learner, seed=5, synthetic=synthetic)
               for learner in ("ihomer", "mlhat-single", "br-hoeffding", "majority-labelset")]
    configs.append(RunConfig(learner="ihomer", seed=1, dataset=str(arff), label_spec=LabelSpec(count=3)))
    same = 0
    for k, cfg in enumerate(configs):
        paths = []
        for rep in range(2):
            cfg.out = str(tmp_path / f"run{k}_{rep}")
            run_benchmark(cfg)
            paths.append(Path(cfg.out) / "report.json")
        same += filecmp.cmp(paths[0], paths[1], shallow=False)
    ok = same == len(configs)
    verdict("byte-identical reports", ok, f"{same}/{len(configs)} configurations")
    assert ok


if __name__ == "__main__":
    import tempfile

    def _print(name, ok, detail=""):
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
        return ok

    for fn in [v for k, v in list(globals().items()) if k.startswith("test_")]:
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(_print, Path(d))
            else:
                fn(_print)
        except AssertionError:
            pass
