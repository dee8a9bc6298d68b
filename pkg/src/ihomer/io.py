"""Dataset ingestion (ARFF, MULAN label XML, CSV) and synthetic drifting streams."""
from __future__ import annotations

import csv
import math
import re
import shlex
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence
from xml.parsers import expat

import numpy as np

from .core import Instance, LabelSet


class DatasetError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line


class MalformedHeaderError(DatasetError):
    pass


class UnknownLabelError(DatasetError):
    pass


class NonBinaryLabelError(DatasetError):
    pass


class MalformedDataError(DatasetError):
    pass


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    n_instances: int
    n_features: int
    n_labels: int
    cardinality: float
    density: float
    mean_ir: float
    temporally_ordered: bool = False
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("feature_names")
        out.pop("label_names")
        return out


def label_statistics(label_sets: Sequence[LabelSet], n_labels: int) -> tuple[float, float, float]:
    """Cardinality, density and mean imbalance ratio of a label-set sample."""
    if not label_sets or n_labels == 0:
        return 0.0, 0.0, math.nan
    counts = np.zeros(n_labels)
    total = 0
    for s in label_sets:
        total += len(s)
        for i in s:
            counts[i] += 1
    card = total / len(label_sets)
    present = counts[counts > 0]
    mean_ir = float(np.mean(present.max() / present)) if present.size else math.nan
    return card, card / n_labels, mean_ir


def make_meta(name, instances: Sequence[Instance], n_features, n_labels, temporally_ordered=False,
              feature_names=(), label_names=()) -> DatasetMeta:
    card, dens, mean_ir = label_statistics([i.labels for i in instances], n_labels)
    return DatasetMeta(name, len(instances), n_features, n_labels, card, dens, mean_ir,
                       temporally_ordered, tuple(feature_names), tuple(label_names))


# ---------------------------------------------------------------- ARFF

@dataclass(frozen=True)
class LabelSpec:
    """Where the label attributes live in an ARFF file.

    Exactly one of ``xml`` (MULAN label file), ``count`` (with ``position``
    'first' or 'last') or ``prefix`` should be given; with none, the MEKA
    ``-C n`` option in the relation name is used.
    """

    xml: str | Path | None = None
    count: int | None = None
    position: str = "last"
    prefix: str | None = None


@dataclass
class _Attribute:
    name: str
    kind: str  # numeric | nominal
    values: tuple[str, ...] = ()


_ATTR_RE = re.compile(r"@attribute\s+('(?:[^'\\]|\\.)*'|\"(?:[^\"\\]|\\.)*\"|\S+)\s+(.*)$", re.I)
_TRUE = {"1", "true", "yes", "t", "y"}
_FALSE = {"0", "false", "no", "f", "n"}


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1].replace("\\'", "'").replace('\\"', '"')
    return token


def _split_values(text: str) -> list[str]:
    """Split a comma-separated ARFF value list honouring quotes."""
    out, buf, quote = [], [], None
    for ch in text:
        if quote:
            buf.append(ch)
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            buf.append(ch)
        elif ch == ",":
            out.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    out.append("".join(buf).strip())
    return out


def read_label_xml(path) -> list[str]:
    """Label names from a MULAN label XML file (nested labels are flattened)."""
    names: list[str] = []
    parser = expat.ParserCreate()

    def start(tag, attrs):
        local = tag.split(":")[-1]
        if local == "label":
            if "name" not in attrs:
                raise MalformedHeaderError("<label> without name", parser.CurrentLineNumber, path)
            names.append(attrs["name"])

    parser.StartElementHandler = start
    try:
        with open(path, "rb") as fh:
            parser.ParseFile(fh)
    except expat.ExpatError as exc:
        raise MalformedHeaderError(f"invalid label XML: {exc}", exc.lineno, path) from exc
    return names


def _parse_header(lines, path):
    relation = None
    attributes: list[_Attribute] = []
    for lineno, raw in lines:
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if low.startswith("@relation"):
            relation = _unquote(line[len("@relation"):].strip())
        elif low.startswith("@attribute"):
            m = _ATTR_RE.match(line)
            if not m:
                raise MalformedHeaderError(f"cannot parse attribute: {line!r}", lineno, path)
            name, spec = _unquote(m.group(1)), m.group(2).strip()
            if spec.startswith("{"):
                if not spec.endswith("}"):
                    raise MalformedHeaderError(f"unterminated nominal set: {spec!r}", lineno, path)
                values = tuple(_unquote(v) for v in _split_values(spec[1:-1]) if v != "")
                attributes.append(_Attribute(name, "nominal", values))
            elif spec.lower() in ("numeric", "real", "integer"):
                attributes.append(_Attribute(name, "numeric"))
            else:
                raise MalformedHeaderError(f"unsupported attribute type {spec!r}", lineno, path)
        elif low.startswith("@data"):
            if relation is None:
                raise MalformedHeaderError("@data before @relation", lineno, path)
            if not attributes:
                raise MalformedHeaderError("no attributes declared", lineno, path)
            return relation, attributes
        else:
            raise MalformedHeaderError(f"unexpected header line: {line!r}", lineno, path)
    raise MalformedHeaderError("missing @data section", None, path)


def _meka_label_count(relation: str):
    try:
        tokens = shlex.split(relation.replace(":", " "))
    except ValueError:
        tokens = relation.split()
    for i, tok in enumerate(tokens[:-1]):
        if tok == "-C":
            return int(tokens[i + 1])
    return None


def _label_positions(attributes, spec: LabelSpec, relation, path) -> list[int]:
    names = [a.name for a in attributes]
    if spec.xml is not None:
        wanted = read_label_xml(spec.xml)
        index = {n: i for i, n in enumerate(names)}
        out = []
        for label in wanted:
            if label not in index:
                raise UnknownLabelError(f"label {label!r} from XML is not an ARFF attribute", None, spec.xml)
            out.append(index[label])
        return out
    if spec.prefix is not None:
        return [i for i, n in enumerate(names) if n.startswith(spec.prefix)]
    count = spec.count
    position = spec.position
    if count is None:
        c = _meka_label_count(relation)
        if c is None:
            raise MalformedHeaderError("no label specification and no -C option in @relation", None, path)
        count, position = abs(c), ("first" if c > 0 else "last")
    if count > len(attributes):
        raise MalformedHeaderError(f"{count} labels requested but only {len(attributes)} attributes", None, path)
    if position == "first":
        return list(range(count))
    return list(range(len(attributes) - count, len(attributes)))


def _label_value(token: str, lineno, path) -> bool:
    v = _unquote(token).strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE or v == "?":
        return False  # missing labels count as absent
    raise NonBinaryLabelError(f"non-binary label value {token!r}", lineno, path)


def load_arff(path, label_spec: LabelSpec | None = None, nominal: str = "onehot",
              temporally_ordered: bool = False) -> tuple[DatasetMeta, Iterator[Instance]]:
    """Read a dense or sparse multi-label ARFF file.

    Nominal features are one-hot encoded (``nominal="onehot"``) or replaced
    by their value index (``nominal="index"``); missing features become 0.
    """
    path = Path(path)
    label_spec = label_spec or LabelSpec()
    with open(path, encoding="utf-8", errors="replace") as fh:
        numbered = list(enumerate(fh, start=1))
    it = iter(numbered)
    relation, attributes = _parse_header(it, path)
    label_pos = _label_positions(attributes, label_spec, relation, path)
    label_of = {a: k for k, a in enumerate(label_pos)}
    for a in label_pos:
        attr = attributes[a]
        if attr.kind != "nominal" or not all(v.lower() in _TRUE | _FALSE for v in attr.values):
            raise NonBinaryLabelError(f"label attribute {attr.name!r} is not binary", None, path)

    # feature layout: attribute index -> (column offset, width)
    layout: dict[int, tuple[int, int]] = {}
    feature_names: list[str] = []
    for a, attr in enumerate(attributes):
        if a in label_of:
            continue
        if attr.kind == "nominal" and nominal == "onehot":
            layout[a] = (len(feature_names), len(attr.values))
            feature_names.extend(f"{attr.name}={v}" for v in attr.values)
        else:
            layout[a] = (len(feature_names), 1)
            feature_names.append(attr.name)
    n_features = len(feature_names)
    value_index = [
        {v: i for i, v in enumerate(attr.values)} if attr.kind == "nominal" else None for attr in attributes
    ]

    def put_feature(row, a, token, lineno):
        token = _unquote(token)
        if token == "?":
            return
        off, width = layout[a]
        attr = attributes[a]
        if attr.kind == "numeric":
            try:
                row[off] = float(token)
            except ValueError:
                raise MalformedDataError(f"non-numeric value {token!r} for {attr.name!r}", lineno, path)
            return
        idx = value_index[a].get(token)
        if idx is None:
            raise MalformedDataError(f"value {token!r} not declared for {attr.name!r}", lineno, path)
        if width == 1:
            row[off] = float(idx)
        else:
            row[off + idx] = 1.0

    instances: list[Instance] = []
    n_attr = len(attributes)
    for lineno, raw in it:
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        row = np.zeros(n_features)
        labels: list[int] = []
        if line.startswith("{"):
            if not line.endswith("}"):
                raise MalformedDataError("unterminated sparse row", lineno, path)
            body = line[1:-1].strip()
            entries = _split_values(body) if body else []
            for entry in entries:
                parts = entry.split(None, 1)
                if len(parts) != 2:
                    raise MalformedDataError(f"bad sparse entry {entry!r}", lineno, path)
                try:
                    a = int(parts[0])
                except ValueError:
                    raise MalformedDataError(f"bad sparse index {parts[0]!r}", lineno, path)
                if not 0 <= a < n_attr:
                    raise MalformedDataError(f"sparse index {a} out of range", lineno, path)
                if a in label_of:
                    if _label_value(parts[1], lineno, path):
                        labels.append(label_of[a])
                else:
                    put_feature(row, a, parts[1], lineno)
        else:
            values = _split_values(line)
            if len(values) != n_attr:
                raise MalformedDataError(f"expected {n_attr} values, found {len(values)}", lineno, path)
            for a, token in enumerate(values):
                if a in label_of:
                    if _label_value(token, lineno, path):
                        labels.append(label_of[a])
                else:
                    put_feature(row, a, token, lineno)
        instances.append(Instance(row, LabelSet.of(labels)))

    label_names = [attributes[a].name for a in label_pos]
    name = relation.split(":")[0].strip() or path.stem
    meta = make_meta(name, instances, n_features, len(label_pos), temporally_ordered,
                     feature_names, label_names)
    return meta, iter(instances)


def write_arff(path, meta: DatasetMeta, instances: Sequence[Instance], sparse: bool = False) -> None:
    """Write numeric features followed by binary label attributes."""
    fnames = meta.feature_names or tuple(f"x{i}" for i in range(meta.n_features))
    lnames = meta.label_names or tuple(f"y{i}" for i in range(meta.n_labels))
    with open(path, "w") as fh:
        fh.write(f"@relation '{meta.name}: -C -{meta.n_labels}'\n\n")
        for n in fnames:
            fh.write(f"@attribute '{n}' numeric\n")
        for n in lnames:
            fh.write(f"@attribute '{n}' {{0,1}}\n")
        fh.write("\n@data\n")
        F = meta.n_features
        for inst in instances:
            if sparse:
                parts = [f"{i} {v!r}" for i, v in enumerate(inst.features.tolist()) if v != 0.0]
                parts += [f"{F + k} 1" for k in inst.labels]
                fh.write("{" + ",".join(parts) + "}\n")
            else:
                bits = ["0"] * meta.n_labels
                for k in inst.labels:
                    bits[k] = "1"
                fh.write(",".join([repr(float(v)) for v in inst.features] + bits) + "\n")


def write_label_xml(path, label_names: Sequence[str]) -> None:
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="utf-8"?>\n')
        fh.write('<labels xmlns="http://mulan.sourceforge.net/labels">\n')
        for n in label_names:
            fh.write(f'  <label name="{n}"></label>\n')
        fh.write("</labels>\n")


def load_csv(path, n_labels: int, header: bool | None = None,
             temporally_ordered: bool = False) -> tuple[DatasetMeta, Iterator[Instance]]:
    """Numeric features followed by ``n_labels`` trailing 0/1 columns."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = None
    if rows and header is not False:
        try:
            [float(v) for v in rows[0]]
            is_header = bool(header)
        except ValueError:
            is_header = True
        if is_header:
            names, rows = rows[0], rows[1:]
    instances = []
    width = None
    for lineno, row in enumerate(rows, start=2 if names else 1):
        if not row:
            continue
        if width is None:
            width = len(row)
            if width <= n_labels:
                raise MalformedDataError(f"{width} columns cannot hold {n_labels} labels", lineno, path)
        elif len(row) != width:
            raise MalformedDataError(f"expected {width} columns, found {len(row)}", lineno, path)
        try:
            feats = np.array([float(v) for v in row[: width - n_labels]])
        except ValueError as exc:
            raise MalformedDataError(str(exc), lineno, path)
        labels = [k for k, v in enumerate(row[width - n_labels:]) if _label_value(v, lineno, path)]
        instances.append(Instance(feats, LabelSet(tuple(labels))))
    n_features = (width - n_labels) if width else 0
    fnames = names[: n_features] if names else ()
    lnames = names[n_features:] if names else ()
    meta = make_meta(path.stem, instances, n_features, n_labels, temporally_ordered, fnames, lnames)
    return meta, iter(instances)


# ---------------------------------------------------------------- synthetic streams

GENERATOR_KINDS = ("hypercube", "hypersphere", "correlated-bernoulli")


@dataclass(frozen=True)
class DriftEvent:
    position: int
    kind: str = "abrupt"  # abrupt | gradual
    affected: str = "label-correlations"  # features | label-correlations | both
    width: int = 500  # transition length of a gradual drift
    swap: tuple[int, int] | None = None  # labels exchanged by a correlation drift
    # positions that emitted label l emit permutation[l] afterwards
    permutation: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("abrupt", "gradual"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.affected not in ("features", "label-correlations", "both"):
            raise ValueError(f"unknown drift target {self.affected!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = "correlated-bernoulli"
    n_features: int = 10
    n_labels: int = 4
    n_instances: int = 10_000
    drifts: tuple[DriftEvent, ...] = ()
    seed: int = 0
    # correlated-bernoulli: label blocks, default consecutive pairs
    blocks: tuple[tuple[int, ...], ...] | None = None
    within_similarity: float = 0.9
    cross_similarity: float = 0.05
    # exclusive: one feature picks the active block; independent: each block has its own feature
    block_activation: str = "exclusive"
    # hypercube / hypersphere
    relevant_features: int = 3

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator {self.kind!r}")
        if self.block_activation not in ("exclusive", "independent"):
            raise ValueError(f"unknown block activation {self.block_activation!r}")
        positions = [d.position for d in self.drifts]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValueError("drift positions must be strictly increasing")
        if positions and (positions[0] < 0 or positions[-1] >= self.n_instances):
            raise ValueError("drift positions must lie inside the stream")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        d["drifts"] = tuple(
            DriftEvent(**{
                **e,
                "swap": tuple(e["swap"]) if e.get("swap") else None,
                "permutation": tuple(e["permutation"]) if e.get("permutation") else None,
            })
            for e in d.get("drifts", ())
        )
        if d.get("blocks") is not None:
            d["blocks"] = tuple(tuple(b) for b in d["blocks"])
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["drifts"] = [asdict(e) for e in self.drifts]
        return out

    def label_blocks(self) -> tuple[tuple[int, ...], ...]:
        if self.blocks is not None:
            return self.blocks
        return tuple(tuple(range(i, min(i + 2, self.n_labels))) for i in range(0, self.n_labels, 2))


def block_cross_rate(within: float, cross: float, n_blocks: int) -> float:
    """Probability of activating a second block so that cross-block pairs reach ``cross`` Jaccard similarity.

    A label of an active block is present with probability ``(1 + within) / 2``.
    """
    if n_blocks < 2 or cross <= 0:
        return 0.0
    m = (1.0 + within) / 2.0
    denom = (1.0 + cross) * m / (n_blocks - 1) - cross
    return float(min(max(cross / denom, 0.0), 1.0)) if denom > 0 else 1.0


def expected_cardinality(spec: SyntheticSpec) -> float:
    """Analytic mean label-set size of a stationary correlated-bernoulli stream."""
    blocks = spec.label_blocks()
    K = len(blocks)
    if spec.block_activation == "independent":
        rho = K / 2.0 - 1.0  # each block is active with probability 1/2
    else:
        rho = block_cross_rate(spec.within_similarity, spec.cross_similarity, K)
    total = 0.0
    for b in blocks:
        s = len(b)
        per_block = s if s == 1 else spec.within_similarity * s + (1 - spec.within_similarity) * s / 2.0
        total += per_block * (1.0 + rho) / K
    return total


@dataclass
class _Concept:
    permutation: np.ndarray
    relevant: int = 0
    centers: np.ndarray | None = None
    radii: np.ndarray | None = None


class _Generator:
    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        self.blocks = spec.label_blocks()
        self.rho = block_cross_rate(spec.within_similarity, spec.cross_similarity, len(self.blocks))
        self.concept = self._initial_concept()

    def _shapes(self):
        r = min(self.spec.relevant_features, self.spec.n_features)
        L = self.spec.n_labels
        centers = self.rng.random((L, r))
        if self.spec.kind == "hypersphere":
            radii = self.rng.uniform(0.25, 0.45, L)
        else:
            radii = self.rng.uniform(0.15, 0.3, L)
        return centers, radii

    def _initial_concept(self) -> _Concept:
        c = _Concept(np.arange(self.spec.n_labels))
        if self.spec.kind != "correlated-bernoulli":
            c.centers, c.radii = self._shapes()
        return c

    def drifted(self, concept: _Concept, event: DriftEvent) -> _Concept:
        new = _Concept(concept.permutation.copy(), concept.relevant, concept.centers, concept.radii)
        if event.affected in ("label-correlations", "both"):
            if event.permutation is not None:
                relabel = np.asarray(event.permutation)
                if sorted(relabel.tolist()) != list(range(self.spec.n_labels)):
                    raise ValueError("drift permutation must be a permutation of the labels")
                new.permutation = relabel[new.permutation]
                i = j = None
            elif event.swap is not None:
                i, j = event.swap
            elif len(self.blocks) >= 2:
                i, j = self.blocks[0][-1], self.blocks[1][0]
            else:
                i, j = self.rng.choice(self.spec.n_labels, 2, replace=False)
            if i is not None:
                perm = new.permutation
                pi, pj = np.flatnonzero(perm == i)[0], np.flatnonzero(perm == j)[0]
                perm[pi], perm[pj] = j, i
        if event.affected in ("features", "both"):
            if self.spec.kind == "correlated-bernoulli":
                new.relevant = (concept.relevant + 1) % self.spec.n_features
            else:
                new.centers, new.radii = self._shapes()
        return new

    def labels(self, x: np.ndarray, concept: _Concept) -> list[int]:
        rng = self.rng
        kind = self.spec.kind
        if kind == "correlated-bernoulli":
            K = len(self.blocks)
            F = self.spec.n_features
            if self.spec.block_activation == "independent":
                active = [b for b in range(K) if x[(concept.relevant + b) % F] > 0.5]
            else:
                primary = min(int(x[concept.relevant] * K), K - 1)
                active = [primary]
                if K > 1 and rng.random() < self.rho:
                    other = int(rng.integers(K - 1))
                    active.append(other + (other >= primary))
            slots: list[int] = []
            for b in active:
                block = self.blocks[b]
                if len(block) == 1 or rng.random() < self.spec.within_similarity:
                    slots.extend(block)
                else:
                    # uniform non-empty proper subset
                    while True:
                        mask = rng.random(len(block)) < 0.5
                        if 0 < mask.sum() < len(block):
                            break
                    slots.extend(v for v, m in zip(block, mask) if m)
        else:
            r = concept.centers.shape[1]
            z = x[:r]
            if kind == "hypersphere":
                inside = np.linalg.norm(z[None, :] - concept.centers, axis=1) <= concept.radii
            else:
                inside = np.all(np.abs(z[None, :] - concept.centers) <= concept.radii[:, None], axis=1)
            slots = list(np.flatnonzero(inside))
        return sorted(int(concept.permutation[s]) for s in slots)

    def __iter__(self) -> Iterator[Instance]:
        spec = self.spec
        events = list(spec.drifts)
        concept = self.concept
        pending: tuple[DriftEvent, _Concept, _Concept] | None = None
        for i in range(spec.n_instances):
            while events and events[0].position == i:
                ev = events.pop(0)
                if pending is not None:
                    concept = pending[2]
                    pending = None
                new = self.drifted(concept, ev)
                if ev.kind == "abrupt":
                    concept = new
                else:
                    pending = (ev, concept, new)
            active = concept
            if pending is not None:
                ev, old, new = pending
                frac = (i - ev.position + 1) / max(ev.width, 1)
                if frac >= 1.0:
                    concept, pending, active = new, None, new
                else:
                    active = new if self.rng.random() < frac else old
            x = self.rng.random(spec.n_features)
            yield Instance(x, LabelSet(tuple(self.labels(x, active))))


def generate_synthetic(spec: SyntheticSpec) -> Iterator[Instance]:
    """Deterministic (per seed) synthetic multi-label stream."""
    return iter(_Generator(spec))


def pair_block_derangement(n_blocks: int) -> tuple[int, ...]:
    """Relabelling that scatters every pair block over two other blocks.

    Block ``b`` owns labels ``2b`` and ``2b + 1``.  Afterwards its first slot
    emits the first label of block ``b - 1`` and its second slot the second
    label of block ``b - 2`` (mod ``n_blocks``), so no old pair keeps a shared
    driver.
    """
    if n_blocks < 3:
        raise ValueError("a pair-block derangement needs at least three blocks")
    perm = [0] * (2 * n_blocks)
    for b in range(n_blocks):
        perm[2 * ((b + 1) % n_blocks)] = 2 * b
        perm[2 * ((b + 2) % n_blocks) + 1] = 2 * b + 1
    return tuple(perm)


def correlation_flip_spec(seed: int, n_blocks: int = 3, n_instances: int = 10_000,
                          position: int = 5_000, n_features: int = 10) -> SyntheticSpec:
    """Independent pair blocks whose memberships are reshuffled by one abrupt drift."""
    return SyntheticSpec(
        n_features=n_features,
        n_labels=2 * n_blocks,
        n_instances=n_instances,
        seed=seed,
        block_activation="independent",
        drifts=(DriftEvent(position, permutation=pair_block_derangement(n_blocks)),),
    )


def synthetic_meta(spec: SyntheticSpec) -> DatasetMeta:
    return DatasetMeta(
        name=f"{spec.kind}-seed{spec.seed}",
        n_instances=spec.n_instances,
        n_features=spec.n_features,
        n_labels=spec.n_labels,
        cardinality=math.nan,
        density=math.nan,
        mean_ir=math.nan,
        temporally_ordered=True,
    )
