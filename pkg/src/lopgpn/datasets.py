"""Graph datasets: on-disk format, splits, synthetic SBM graphs, OOD scenarios.

Directory format (UTF-8 text)::

    meta.txt      key = value lines; n_nodes, n_classes, feature_dim required
    edges.tsv     src<TAB>dst per line, 0-based, undirected
    features.tsv  one tab-separated row per node
    labels.tsv    one integer per line (-1 marks a node without a usable label)
    splits.tsv    optional; train, val, test or none per line
    ood.tsv       optional; 1 for OOD-flagged nodes, 0 otherwise

Reals are written with 17 significant digits so save/load round-trips
exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .sparse import SparseMatrix

UNLABELED = -1
_SPLIT_NAMES = ("train", "val", "test", "none")


class DatasetError(ValueError):
    pass


@dataclass(eq=False)
class GraphDataset:
    adjacency: SparseMatrix
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    train_mask: Optional[np.ndarray] = None
    val_mask: Optional[np.ndarray] = None
    test_mask: Optional[np.ndarray] = None
    ood_flags: Optional[np.ndarray] = None
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.adjacency.n_rows
        if self.adjacency.n_cols != n:
            raise DatasetError("adjacency must be square")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DatasetError(f"features must have {n} rows, got shape {self.features.shape}")
        if self.labels.shape != (n,):
            raise DatasetError(f"labels must have {n} entries")
        if np.any(self.labels >= self.n_classes) or np.any(self.labels < UNLABELED):
            raise DatasetError(f"labels must lie in [0, {self.n_classes}) or be {UNLABELED}")
        for name in ("train_mask", "val_mask", "test_mask", "ood_flags"):
            m = getattr(self, name)
            if m is not None:
                m = np.asarray(m, dtype=bool)
                if m.shape != (n,):
                    raise DatasetError(f"{name} must have {n} entries")
                setattr(self, name, m)
        masks = [m for m in (self.train_mask, self.val_mask, self.test_mask) if m is not None]
        if masks and np.any(np.sum(masks, axis=0) > 1):
            raise DatasetError("train/val/test masks overlap")
        if self.ood_flags is not None and self.train_mask is not None and np.any(self.ood_flags & self.train_mask):
            raise DatasetError("OOD-flagged nodes may not be in the train mask")

    @property
    def n_nodes(self) -> int:
        return self.adjacency.n_rows

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def has_split(self) -> bool:
        return self.train_mask is not None

    def edges(self) -> np.ndarray:
        """Undirected edge list with src <= dst."""
        rows = self.adjacency.row_ids()
        cols = self.adjacency.col_indices
        upper = rows <= cols
        return np.stack([rows[upper], cols[upper]], axis=1)


# loading and saving ---------------------------------------------------------


def _read_meta(path: Path) -> Dict[str, str]:
    meta = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetError(f"{path.name}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def _int_field(meta, key):
    try:
        return int(meta[key])
    except KeyError:
        raise DatasetError(f"meta.txt lacks required key {key!r}") from None
    except ValueError:
        raise DatasetError(f"meta.txt: {key} must be an integer, got {meta[key]!r}") from None


def _lines(path: Path):
    return [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]


def load(directory: Union[str, Path]) -> GraphDataset:
    directory = Path(directory)
    for name in ("meta.txt", "edges.tsv", "features.tsv", "labels.tsv"):
        if not (directory / name).is_file():
            raise FileNotFoundError(f"dataset file missing: {directory / name}")
    meta = _read_meta(directory / "meta.txt")
    n = _int_field(meta, "n_nodes")
    k = _int_field(meta, "n_classes")
    d = _int_field(meta, "feature_dim")

    edge_rows = []
    for lineno, line in enumerate(_lines(directory / "edges.tsv"), start=1):
        parts = line.split("\t")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise DatasetError(f"edges.tsv:{lineno}: expected two integers") from None
        if not (0 <= src < n and 0 <= dst < n):
            raise DatasetError(f"edges.tsv:{lineno}: node index out of range [0, {n})")
        edge_rows.append((src, dst))
    adjacency = SparseMatrix.from_edges(np.array(edge_rows, dtype=np.int64).reshape(-1, 2), n)

    feature_lines = _lines(directory / "features.tsv")
    if len(feature_lines) != n:
        raise DatasetError(f"features.tsv has {len(feature_lines)} rows, expected {n}")
    features = np.empty((n, d))
    for i, line in enumerate(feature_lines):
        vals = line.split("\t")
        if len(vals) != d:
            raise DatasetError(f"features.tsv:{i + 1}: expected {d} columns, got {len(vals)}")
        features[i] = [float(v) for v in vals]

    label_lines = _lines(directory / "labels.tsv")
    if len(label_lines) != n:
        raise DatasetError(f"labels.tsv has {len(label_lines)} rows, expected {n}")
    try:
        labels = np.array([int(v) for v in label_lines], dtype=np.int64)
    except ValueError:
        raise DatasetError("labels.tsv: labels must be integers") from None
    if np.any(labels >= k) or np.any(labels < UNLABELED):
        bad = int(labels[(labels >= k) | (labels < UNLABELED)][0])
        raise DatasetError(f"labels.tsv: class {bad} out of range for n_classes = {k}")

    masks = {}
    if (directory / "splits.tsv").is_file():
        tags = [ln.strip() for ln in _lines(directory / "splits.tsv")]
        if len(tags) != n or any(t not in _SPLIT_NAMES for t in tags):
            raise DatasetError(f"splits.tsv needs {n} lines from {_SPLIT_NAMES}")
        tags = np.array(tags)
        masks = {f"{s}_mask": tags == s for s in ("train", "val", "test")}
    ood = None
    if (directory / "ood.tsv").is_file():
        ood_lines = _lines(directory / "ood.tsv")
        if len(ood_lines) != n:
            raise DatasetError(f"ood.tsv has {len(ood_lines)} rows, expected {n}")
        ood = np.array([int(v) for v in ood_lines]) != 0

    extra = {key: v for key, v in meta.items() if key not in ("n_nodes", "n_classes", "feature_dim")}
    return GraphDataset(adjacency, features, labels, k, ood_flags=ood, meta=extra, **masks)


def save(d: GraphDataset, directory: Union[str, Path]):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta_lines = [f"n_nodes = {d.n_nodes}", f"n_classes = {d.n_classes}", f"feature_dim = {d.feature_dim}"]
    meta_lines += [f"{key} = {value}" for key, value in sorted(d.meta.items())]
    (directory / "meta.txt").write_text("\n".join(meta_lines) + "\n", encoding="utf-8")
    (directory / "edges.tsv").write_text("".join(f"{s}\t{t}\n" for s, t in d.edges()), encoding="utf-8")
    rows = ["\t".join(repr(float(v)) for v in row) for row in d.features]
    (directory / "features.tsv").write_text("".join(r + "\n" for r in rows), encoding="utf-8")
    (directory / "labels.tsv").write_text("".join(f"{int(y)}\n" for y in d.labels), encoding="utf-8")
    if d.has_split:
        tags = np.full(d.n_nodes, "none", dtype=object)
        tags[d.train_mask] = "train"
        tags[d.val_mask] = "val"
        tags[d.test_mask] = "test"
        (directory / "splits.tsv").write_text("".join(f"{t}\n" for t in tags), encoding="utf-8")
    elif (directory / "splits.tsv").exists():
        (directory / "splits.tsv").unlink()
    if d.ood_flags is not None:
        (directory / "ood.tsv").write_text("".join(f"{int(f)}\n" for f in d.ood_flags), encoding="utf-8")


# splitting --------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.05
    val_fraction: float = 0.15
    test_fraction: float = 0.80
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f < 0 for f in fracs) or sum(fracs) > 1.0 + 1e-12:
            raise ValueError(f"split fractions must be >= 0 and sum to <= 1, got {fracs}")


def _split_counts(n, spec: SplitSpec) -> Tuple[int, int, int]:
    """Per-slot counts, each within one node of its ideal ``fraction * n``.

    Among such counts the total lands as close as possible to the rounded
    ideal total, then the summed deviation is minimal. A positive training
    fraction always gets at least one node.
    """
    ideal = [f * n for f in (spec.train_fraction, spec.val_fraction, spec.test_fraction)]
    target = int(round(sum(ideal)))
    # every integer within one node of the ideal; empty slots stay empty
    choices = [[c for c in range(max(0, math.ceil(x - 1)), math.floor(x + 1) + 1)] if x > 0 else [0] for x in ideal]
    if spec.train_fraction > 0:
        choices[0] = [c for c in choices[0] if c >= 1]
    best = None
    for counts in itertools.product(*choices):
        if sum(counts) > n:
            continue
        key = (abs(sum(counts) - target), sum(abs(c - x) for c, x in zip(counts, ideal)))
        if best is None or key < best[0]:
            best = (key, counts)
    return best[1]


def split(d: GraphDataset, s: SplitSpec) -> GraphDataset:
    """Assign train/val/test masks; stratified by class when requested."""
    rng = np.random.default_rng(s.seed)
    n = d.n_nodes
    train = np.zeros(n, bool)
    val = np.zeros(n, bool)
    test = np.zeros(n, bool)
    labeled = np.flatnonzero(d.labels != UNLABELED)
    if s.stratified:
        slots = sum(f > 0 for f in (s.train_fraction, s.val_fraction, s.test_fraction))
        groups = [labeled[d.labels[labeled] == c] for c in range(d.n_classes)]
        groups = [g for g in groups if len(g)]
        for g in groups:
            if len(g) < slots:
                raise DatasetError(f"class {d.labels[g[0]]} has {len(g)} nodes, fewer than {slots} split slots")
    else:
        groups = [labeled]
    for g in groups:
        order = rng.permutation(g)
        n_train, n_val, n_test = _split_counts(len(order), s)
        train[order[:n_train]] = True
        val[order[n_train : n_train + n_val]] = True
        test[order[n_train + n_val : n_train + n_val + n_test]] = True
    return replace(d, train_mask=train, val_mask=val, test_mask=test)


# synthetic graphs -------------------------------------------------------------------


def synth_sbm(
    n_nodes: int = 500,
    n_classes: int = 3,
    intra_p: float = 0.05,
    inter_p: float = 0.002,
    feature_dim: int = 16,
    class_separation: float = 2.0,
    seed: int = 0,
    feature_noise: float = 0.5,
) -> GraphDataset:
    """Homophilic stochastic block model with Gaussian class-conditional features.

    Class means are ``class_separation / sqrt(2)`` times distinct basis
    vectors (random unit vectors when classes outnumber feature dimensions),
    so any two means lie ``class_separation`` apart. Within-class noise is
    isotropic with standard deviation ``feature_noise``.
    """
    if n_nodes < 1 or n_classes < 1 or feature_dim < 1:
        raise ValueError("n_nodes, n_classes and feature_dim must be positive")
    if not (0.0 <= inter_p <= 1.0 and 0.0 <= intra_p <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if intra_p <= inter_p:
        raise ValueError(f"homophily requires intra_p > inter_p, got {intra_p} <= {inter_p}")
    if class_separation < 0 or feature_noise < 0:
        raise ValueError("class_separation and feature_noise must be non-negative")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n_nodes) % n_classes)

    src, dst = [], []
    for i in range(n_nodes - 1):
        others = np.arange(i + 1, n_nodes)
        p = np.where(labels[others] == labels[i], intra_p, inter_p)
        hit = others[rng.random(len(others)) < p]
        src.append(np.full(len(hit), i))
        dst.append(hit)
    edges = np.stack([np.concatenate(src or [[]]), np.concatenate(dst or [[]])], axis=1).astype(np.int64)
    adjacency = SparseMatrix.from_edges(edges, n_nodes)

    if n_classes <= feature_dim:
        directions = np.eye(feature_dim)[:n_classes]
    else:
        directions = rng.normal(size=(n_classes, feature_dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = class_separation / math.sqrt(2.0) * directions
    features = means[labels] + feature_noise * rng.normal(size=(n_nodes, feature_dim))
    meta = {
        "generator": "sbm",
        "intra_p": repr(intra_p),
        "inter_p": repr(inter_p),
        "class_separation": repr(class_separation),
        "feature_noise": repr(feature_noise),
        "seed": str(seed),
    }
    return GraphDataset(adjacency, features, labels, n_classes, meta=meta)


PRESETS = {
    "sbm-small": dict(n_nodes=500, n_classes=3, intra_p=0.05, inter_p=0.002, feature_dim=16, class_separation=2.0),
    "sbm-tiny": dict(n_nodes=120, n_classes=3, intra_p=0.15, inter_p=0.005, feature_dim=8, class_separation=2.0),
}


def preset(name: str, seed: int = 0) -> GraphDataset:
    try:
        params = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; valid: {', '.join(PRESETS)}") from None
    return synth_sbm(seed=seed, **params)


def homophily(d: GraphDataset) -> float:
    """Fraction of (undirected, non-loop) edges joining nodes of the same class."""
    e = d.edges()
    e = e[e[:, 0] != e[:, 1]]
    if len(e) == 0:
        return float("nan")
    return float(np.mean(d.labels[e[:, 0]] == d.labels[e[:, 1]]))


# OOD scenarios ------------------------------------------------------------------------


@dataclass(frozen=True)
class LeaveOutClasses:
    classes: Tuple[int, ...]
    name = "leave_out_classes"


@dataclass(frozen=True)
class BernoulliDropout:
    keep_prob: float = 0.5
    node_fraction: float = 0.1
    seed: int = 0
    name = "bernoulli_dropout"


@dataclass(frozen=True)
class GaussianFeatures:
    node_fraction: float = 0.1
    seed: int = 0
    name = "gaussian_features"


OodScenario = Union[LeaveOutClasses, BernoulliDropout, GaussianFeatures]
SCENARIO_NAMES = ("leave_out_classes", "bernoulli_dropout", "gaussian_features")


def default_left_out(n_classes: int) -> Tuple[int, ...]:
    """The floor(K/2) highest class indices."""
    return tuple(range(n_classes - n_classes // 2, n_classes))


def make_scenario(name: str, n_classes: int, seed: int = 0, node_fraction: float = 0.1, keep_prob: float = 0.5):
    if name == "leave_out_classes":
        return LeaveOutClasses(default_left_out(n_classes))
    if name == "bernoulli_dropout":
        return BernoulliDropout(keep_prob=keep_prob, node_fraction=node_fraction, seed=seed)
    if name == "gaussian_features":
        return GaussianFeatures(node_fraction=node_fraction, seed=seed)
    raise ValueError(f"unknown OOD scenario {name!r}; valid: {', '.join(SCENARIO_NAMES)}")


def _perturbation_targets(d: GraphDataset, node_fraction, rng):
    if not 0.0 < node_fraction <= 1.0:
        raise ValueError(f"node_fraction must lie in (0, 1], got {node_fraction}")
    pool = np.flatnonzero(d.test_mask) if d.has_split else np.arange(d.n_nodes)
    count = int(round(node_fraction * d.n_nodes))
    if count > len(pool):
        raise DatasetError(f"cannot perturb {count} nodes, only {len(pool)} candidates")
    return np.sort(rng.choice(pool, size=count, replace=False))


def apply_ood(d: GraphDataset, s: OodScenario) -> GraphDataset:
    """Return a copy of ``d`` with the scenario applied and ``ood_flags`` set.

    Perturbed nodes are drawn from the test mask (all nodes when unsplit),
    so flagged nodes never sit in train or validation masks.
    """
    if isinstance(s, LeaveOutClasses):
        left = sorted(set(s.classes))
        if not left or any(not 0 <= c < d.n_classes for c in left):
            raise ValueError(f"left-out classes must be a non-empty subset of [0, {d.n_classes})")
        kept = [c for c in range(d.n_classes) if c not in left]
        if len(kept) < 2:
            raise DatasetError("leave_out_classes must leave at least 2 in-distribution classes")
        flags = np.isin(d.labels, left)
        remap = np.full(d.n_classes, UNLABELED, dtype=np.int64)
        remap[kept] = np.arange(len(kept))
        labels = np.where(d.labels == UNLABELED, UNLABELED, remap[np.maximum(d.labels, 0)])
        meta = dict(d.meta, ood_scenario=s.name, left_out=",".join(map(str, left)))
        train = d.train_mask & ~flags if d.has_split else None
        val = d.val_mask & ~flags if d.has_split else None
        return replace(d, labels=labels, n_classes=len(kept), train_mask=train, val_mask=val,
                       ood_flags=flags, meta=meta)

    if isinstance(s, BernoulliDropout):
        if not 0.0 < s.keep_prob <= 1.0:
            raise ValueError(f"keep_prob must lie in (0, 1], got {s.keep_prob}")
        rng = np.random.default_rng(s.seed)
        targets = _perturbation_targets(d, s.node_fraction, rng)
        features = d.features.copy()
        keep = rng.random((len(targets), d.feature_dim)) < s.keep_prob
        features[targets] *= keep
    elif isinstance(s, GaussianFeatures):
        rng = np.random.default_rng(s.seed)
        targets = _perturbation_targets(d, s.node_fraction, rng)
        features = d.features.copy()
        features[targets] = rng.normal(size=(len(targets), d.feature_dim))
    else:
        raise TypeError(f"unsupported scenario {s!r}")
    flags = np.zeros(d.n_nodes, bool)
    flags[targets] = True
    meta = dict(d.meta, ood_scenario=s.name)
    return replace(d, features=features, ood_flags=flags, meta=meta)
