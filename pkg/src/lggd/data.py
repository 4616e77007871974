"""Synthetic graph generators, edge corruption, splits, and dataset ingestion."""

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    FileMissing,
    FractionSum,
    InvalidProbability,
    LabelOutOfRange,
    NodeCountMismatch,
    NotEnoughNonEdges,
)
from .graph import Graph, build_graph, load_graph


@dataclass
class LabeledDataset:
    graph: Graph
    features: np.ndarray  # (n, d)
    labels: np.ndarray    # (n,) ints in [0, K)
    n_classes: int

    def __post_init__(self):
        n = self.graph.n_nodes
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise NodeCountMismatch(
                f"graph has {n} nodes, features {self.features.shape[0]} rows, "
                f"labels {self.labels.shape[0]} entries"
            )
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise LabelOutOfRange(
                f"labels must lie in [0, {self.n_classes})"
            )


@dataclass
class SplitSpec:
    """Disjoint node tranches: train/val, optional new-label tranches, test."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    new_tranches: list = field(default_factory=list)


def gen_unit_ball_graph(n, eps, seed):
    """Uniform points in the unit disk, epsilon-neighborhood unit-weight graph.

    Returns (graph, positions, boundary nodes with ||x|| >= 1 - eps).
    """
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n))
    theta = rng.random(n) * 2.0 * np.pi
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    pairs = cKDTree(pos).query_pairs(eps, output_type="ndarray")
    edges = [(int(i), int(j), 1.0) for i, j in pairs]
    g = build_graph(n, edges)
    boundary = np.flatnonzero(r >= 1.0 - eps).tolist()
    return g, pos, boundary


def corrupt_edges(g, m, seed):
    """Add m uniformly sampled distinct non-adjacent unit-weight edges."""
    n = g.n_nodes
    available = n * (n - 1) // 2 - g.edge_count
    if m > available:
        raise NotEnoughNonEdges(f"asked for {m} new edges, only {available} non-edges")
    rng = np.random.default_rng(seed)
    existing = {(i, j) for i, j, _ in g.edges()}
    added = set()
    while len(added) < m:
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        if i == j:
            continue
        pair = (min(i, j), max(i, j))
        if pair in existing or pair in added:
            continue
        added.add(pair)
    edges = g.edges() + [(i, j, 1.0) for i, j in sorted(added)]
    return build_graph(n, edges)


def gen_sbm(n_per_class, n_classes, p_in, p_out, feature_dim, feature_noise, seed):
    """Planted-partition graph with orthogonal class-mean features."""
    if not (0 <= p_out < p_in <= 1):
        raise InvalidProbability(f"need 0 <= p_out < p_in <= 1, got {p_out}, {p_in}")
    if feature_dim < n_classes:
        raise ValueError("feature_dim must be >= n_classes for orthogonal means")
    rng = np.random.default_rng(seed)
    n = n_per_class * n_classes
    labels = np.repeat(np.arange(n_classes), n_per_class)
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.shape[0]) < p
    edges = [(int(i), int(j), 1.0) for i, j in zip(iu[keep], ju[keep])]
    g = build_graph(n, edges)
    means = np.zeros((n_classes, feature_dim))
    means[np.arange(n_classes), np.arange(n_classes)] = 1.0
    features = means[labels] + feature_noise * rng.standard_normal((n, feature_dim))
    return LabeledDataset(graph=g, features=features, labels=labels,
                          n_classes=n_classes)


def _largest_remainder(quotas, total):
    base = np.floor(quotas).astype(int)
    short = total - base.sum()
    if short > 0:
        order = np.argsort(-(quotas - base), kind="stable")
        base[order[:short]] += 1
    return base


def make_splits(labels, fractions, seed):
    """Stratified random partition; tranche sizes round to nearest, remainder
    goes to the final (test) tranche.

    fractions: (train, val, [nl1, nl2, ...,] test); must sum to 1.
    """
    fractions = list(fractions)
    if len(fractions) < 3:
        raise FractionSum("need at least train/val/test fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise FractionSum(f"fractions sum to {sum(fractions)}, expected 1")
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    n_classes = int(labels.max()) + 1
    rng = np.random.default_rng(seed)
    pools = []
    for k in range(n_classes):
        members = np.flatnonzero(labels == k)
        rng.shuffle(members)
        pools.append(list(members))
    class_counts = np.array([len(p) for p in pools], dtype=float)
    tranches = []
    for frac in fractions[:-1]:
        size = int(round(n * frac))
        per_class = _largest_remainder(frac * class_counts, size)
        # never draw more than a class pool still holds
        per_class = np.minimum(per_class, [len(p) for p in pools])
        chunk = []
        for k in range(n_classes):
            take = int(per_class[k])
            chunk.extend(pools[k][:take])
            pools[k] = pools[k][take:]
        tranches.append(np.asarray(sorted(chunk), dtype=np.int64))
    test = np.asarray(sorted(x for p in pools for x in p), dtype=np.int64)
    return SplitSpec(train=tranches[0], val=tranches[1],
                     test=test, new_tranches=tranches[2:])


def save_features_csv(features, path):
    np.savetxt(path, features, delimiter=",")


def save_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for y in labels:
            fh.write(f"{int(y)}\n")


def load_dataset(graph_path, features_path, labels_path, n_classes=None):
    """Read the on-disk dataset format (graph TSV + feature CSV + label list)."""
    for path in (graph_path, features_path, labels_path):
        if not os.path.exists(path):
            raise FileMissing(str(path))
    g = load_graph(graph_path)
    features = np.loadtxt(features_path, delimiter=",", ndmin=2)
    with open(labels_path, encoding="utf-8") as fh:
        labels = np.asarray([int(line) for line in fh if line.strip()], dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    return LabeledDataset(graph=g, features=features, labels=labels,
                          n_classes=n_classes)
