"""Desk-scale backbones: a 2-layer GCN and a logistic-regression baseline,
built on the same reverse-mode tape as the trainer."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .errors import EmptySplit, ShapeMismatch, TrainingDiverged
from .learn import AdamState, adam_step


@dataclass
class GcnConfig:
    hidden: int = 32
    dropout: float = 0.5
    lr: float = 0.01
    weight_decay: float = 1e-6
    max_epochs: int = 5000
    patience: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.patience > self.max_epochs:
            raise ValueError("patience must be <= max_epochs")


def normalize_adjacency(g):
    """Symmetric GCN propagation operator D^-1/2 (A + I) D^-1/2."""
    n = g.n_nodes
    a = sp.csr_matrix((g.weights, g.indices, g.indptr), shape=(n, n))
    a = a + sp.identity(n, format="csr")
    dinv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    return sp.diags(dinv) @ a @ sp.diags(dinv)


@dataclass
class GcnModel:
    W0: np.ndarray
    b0: np.ndarray
    W1: np.ndarray
    b1: np.ndarray

    def logits(self, ahat, X):
        h = np.maximum(ahat @ (X @ self.W0) + self.b0, 0.0)
        return ahat @ (h @ self.W1) + self.b1


def _gcn_logits_tape(ahat, X, params, masks):
    h = ad.spmm(ahat, ad.Tensor(X) @ params["W0"]) + params["b0"]
    h = ad.relu(h)
    if masks is not None:
        h = h * ad.Tensor(masks)
    return ad.spmm(ahat, h @ params["W1"]) + params["b1"]


def _check_split(nodes, what):
    nodes = np.asarray(list(nodes), dtype=np.int64)
    if nodes.size == 0:
        raise EmptySplit(f"{what} split is empty")
    return nodes


def _accuracy(logits, labels, nodes):
    pred = np.argmax(logits[nodes], axis=1)
    return float(np.mean(pred == labels[nodes]))


def train_gcn(g, X, labels, split, cfg):
    """Train the 2-layer GCN with early stopping on validation accuracy.

    Returns (GcnModel of the best validation epoch, validation curve).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] != g.n_nodes:
        raise ShapeMismatch(f"X rows {X.shape[0]} != n_nodes {g.n_nodes}")
    train = _check_split(split.train, "train")
    val = _check_split(split.val, "val")
    K = int(labels.max()) + 1
    ahat = normalize_adjacency(g)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x6C]))
    bound0 = np.sqrt(6.0 / (X.shape[1] + cfg.hidden))
    bound1 = np.sqrt(6.0 / (cfg.hidden + K))
    params = {
        "W0": ad.parameter(rng.uniform(-bound0, bound0, (X.shape[1], cfg.hidden))),
        "b0": ad.parameter(np.zeros(cfg.hidden)),
        "W1": ad.parameter(rng.uniform(-bound1, bound1, (cfg.hidden, K))),
        "b1": ad.parameter(np.zeros(K)),
    }
    flat = {k: t.data for k, t in params.items()}
    state = AdamState()
    best = GcnModel(W0=flat["W0"].copy(), b0=flat["b0"].copy(),
                    W1=flat["W1"].copy(), b1=flat["b1"].copy())
    best_acc = -1.0
    stale = 0
    val_curve = []
    for _ in range(cfg.max_epochs):
        masks = None
        if cfg.dropout > 0:
            keep = rng.random((g.n_nodes, cfg.hidden)) >= cfg.dropout
            masks = keep / (1.0 - cfg.dropout)
        for t in params.values():
            t.grad = None
        logits = _gcn_logits_tape(ahat, X, params, masks)
        loss = ad.cross_entropy_mean(
            ad.take_columns(logits.T, train).T, labels[train]
        )
        if not np.isfinite(loss.data):
            raise TrainingDiverged(f"non-finite training loss {loss.data}")
        loss.backward()
        grads = {k: t.grad if t.grad is not None else np.zeros_like(t.data)
                 for k, t in params.items()}
        adam_step(flat, grads, state, cfg.lr,
                  weight_decay=cfg.weight_decay, decay_keys=("W0", "W1"))
        model = GcnModel(W0=flat["W0"].copy(), b0=flat["b0"].copy(),
                         W1=flat["W1"].copy(), b1=flat["b1"].copy())
        acc = _accuracy(model.logits(ahat, X), labels, val)
        val_curve.append(acc)
        if acc > best_acc:
            best_acc = acc
            best = model
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best, val_curve


def predict_proba(model, g, X):
    ahat = normalize_adjacency(g)
    return ad.softmax_rows(model.logits(ahat, np.asarray(X, dtype=np.float64)))


def evaluate(model, g, X, labels, nodes):
    """Fraction of correct predictions on the given node set."""
    nodes = _check_split(nodes, "evaluation")
    proba = predict_proba(model, g, X)
    return _accuracy(np.log(proba + 1e-300), np.asarray(labels, dtype=np.int64), nodes)


@dataclass
class LogisticModel:
    W: np.ndarray
    b: np.ndarray

    def logits(self, X):
        return X @ self.W + self.b


def train_logistic(X, labels, split, cfg):
    """Multinomial logistic regression with Adam; graph-free baseline."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train = _check_split(split.train, "train")
    val = _check_split(split.val, "val")
    K = int(labels.max()) + 1
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x10]))
    bound = np.sqrt(6.0 / (X.shape[1] + K))
    params = {
        "W": ad.parameter(rng.uniform(-bound, bound, (X.shape[1], K))),
        "b": ad.parameter(np.zeros(K)),
    }
    flat = {k: t.data for k, t in params.items()}
    state = AdamState()
    best = LogisticModel(W=flat["W"].copy(), b=flat["b"].copy())
    best_acc = -1.0
    stale = 0
    for _ in range(cfg.max_epochs):
        for t in params.values():
            t.grad = None
        logits = ad.Tensor(X[train]) @ params["W"] + params["b"]
        loss = ad.cross_entropy_mean(logits, labels[train])
        if not np.isfinite(loss.data):
            raise TrainingDiverged(f"non-finite training loss {loss.data}")
        loss.backward()
        grads = {k: t.grad if t.grad is not None else np.zeros_like(t.data)
                 for k, t in params.items()}
        adam_step(flat, grads, state, cfg.lr,
                  weight_decay=cfg.weight_decay, decay_keys=("W",))
        model = LogisticModel(W=flat["W"].copy(), b=flat["b"].copy())
        acc = _accuracy(model.logits(X), labels, val)
        if acc > best_acc:
            best_acc = acc
            best = model
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best
