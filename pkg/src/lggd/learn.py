"""Pipeline1: MLP initial condition, boundary loss, exact gradients through
the unrolled RK4 integrator, Adam, and the training loop."""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, EmptyBoundary, ShapeMismatch
from .graph import PotentialParams, check_p, degrees, potential_eval
from .solver import SolverConfig, with_clamping


@dataclass
class MlpParams:
    """Layered perceptron: ReLU hidden activations, softplus output."""

    weights: list            # (d_in, d_out) per layer
    biases: list             # (d_out,) per layer

    def __post_init__(self):
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape[1] != b.shape[0]:
                raise ShapeMismatch(f"layer {l}: weight {W.shape} vs bias {b.shape}")
            if l > 0 and self.weights[l - 1].shape[1] != W.shape[0]:
                raise ShapeMismatch(f"layer {l}: dimension chain broken")

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def n_classes(self):
        return self.weights[-1].shape[1]


def mlp_init(in_dim, hidden_sizes, n_classes, seed):
    """Glorot-uniform initialization."""
    rng = np.random.default_rng(seed)
    sizes = [in_dim, *hidden_sizes, n_classes]
    weights, biases = [], []
    for d_in, d_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpParams(weights=weights, biases=biases)


@dataclass
class TrainConfig:
    epochs: int = 150
    lr: float = 0.01
    weight_decay: float = 0.0005
    dropout: float = 0.5
    hidden_sizes: tuple = (64,)
    learn_rho: bool = False
    loss_kind: str = "cross_entropy"  # or "squared"
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0:
            raise ConfigError("epochs must be > 0")
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")
        if self.loss_kind not in ("cross_entropy", "squared"):
            raise ConfigError(f"unknown loss_kind {self.loss_kind!r}")


def _mlp_forward_tape(params, features, dropout_masks=None):
    """Taped forward pass; returns (K, n) Tensor and the parameter Tensors."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatch(
            f"feature width {features.shape[1]} != MLP input {params.weights[0].shape[0]}"
        )
    Ws = [ad.parameter(W) for W in params.weights]
    bs = [ad.parameter(b) for b in params.biases]
    h = ad.Tensor(features)
    last = len(Ws) - 1
    for l, (W, b) in enumerate(zip(Ws, bs)):
        h = h @ W + b
        if l < last:
            h = ad.relu(h)
            if dropout_masks is not None:
                h = h * ad.Tensor(dropout_masks[l])
    out = ad.softplus(h).T  # (K, n)
    return out, Ws, bs


def mlp_forward(params, features, dropout_masks=None):
    """Per-class nonnegative initial distances, shape (K, n_nodes)."""
    out, _, _ = _mlp_forward_tape(params, features, dropout_masks)
    return out.data


def dropout_masks(rng, params, n_rows, rate):
    """Inverted-dropout masks for every hidden layer."""
    if rate <= 0:
        return None
    masks = []
    for W in params.weights[:-1]:
        keep = rng.random((n_rows, W.shape[1])) >= rate
        masks.append(keep / (1.0 - rate))
    return masks


def _boundary_logits(snapshot, boundary):
    """Stack -f^k(x, t) over boundary nodes into (m, K) logits + labels."""
    nodes, labels = [], []
    for k, cls in enumerate(boundary.classes):
        nodes.extend(cls)
        labels.extend([k] * len(cls))
    if not nodes:
        raise EmptyBoundary("boundary has no nodes")
    cols = ad.take_columns(snapshot, nodes)  # (K, m)
    return (-cols).T, np.asarray(labels, dtype=np.int64), nodes


def _boundary_loss_tape(snapshots, boundary, loss_kind="cross_entropy"):
    total = None
    for snap in snapshots:
        logits, labels, nodes = _boundary_logits(snap, boundary)
        if loss_kind == "cross_entropy":
            term = ad.cross_entropy_mean(logits, labels)
        else:
            # own-class self-distances, driven to zero in squared mean
            sel = ad.Tensor(np.eye(len(boundary.classes))[:, labels])  # (K, m) one-hot
            own = ad.take_columns(snap, nodes) * sel
            term = ad.mean_square(own) * float(len(boundary.classes))
        total = term if total is None else total + term
    return total * (1.0 / len(snapshots))


def boundary_loss(fld, boundary, loss_kind="cross_entropy"):
    """Mean boundary-node loss over all snapshots of a DistanceField."""
    snaps = [ad.Tensor(fld.values[:, ti, :]) for ti in range(fld.values.shape[1])]
    return float(_boundary_loss_tape(snaps, boundary, loss_kind).data)


def _integrate_tape(g, f, rho_const, log_rho, cfg):
    """Unrolled RK4 (no boundary clamping: Solver1 semantics)."""
    h = cfg.step_size
    snapshots = []
    step = 0
    for target in cfg.snapshot_steps():
        while step < target:
            f = ad.rk4_step(g, f, cfg.p, h, rho_const=rho_const, log_rho=log_rho)
            step += 1
        snapshots.append(f)
    return snapshots


def loss_and_gradients(g, boundary, features, mlp, pot, solver_cfg, train_cfg,
                       masks=None):
    """Boundary loss of the unrolled integration and its exact gradients.

    Returns (loss, grads) with grads = {"weights": [...], "biases": [...],
    "log_rho": array or None}.
    """
    if solver_cfg.clamp_boundary:
        raise ConfigError("training integrates without boundary clamping")
    check_p(solver_cfg.p)
    phi0, Ws, bs = _mlp_forward_tape(mlp, features, masks)
    log_rho = None
    rho_const = None
    if train_cfg.learn_rho:
        if pot.mode != "learned":
            raise ConfigError("learn_rho=true needs a learned-mode potential")
        log_rho = ad.parameter(pot.log_rho)
    else:
        rho_const = potential_eval(g, pot)
    snapshots = _integrate_tape(g, phi0, rho_const, log_rho, solver_cfg)
    loss = _boundary_loss_tape(snapshots, boundary, train_cfg.loss_kind)
    loss.backward()
    grads = {
        "weights": [W.grad if W.grad is not None else np.zeros_like(W.data) for W in Ws],
        "biases": [b.grad if b.grad is not None else np.zeros_like(b.data) for b in bs],
        "log_rho": None,
    }
    if log_rho is not None:
        grads["log_rho"] = (
            log_rho.grad if log_rho.grad is not None else np.zeros_like(log_rho.data)
        )
    return float(loss.data), grads


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8,
              weight_decay=0.0, decay_keys=()):
    """One Adam step with decoupled weight decay, over a flat name->array dict.

    Decay applies only to names in decay_keys. Updates params in place.
    """
    state.t += 1
    t = state.t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1.0 - beta1) * (g - m)
        v += (1.0 - beta2) * (g * g - v)
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)
        if weight_decay and name in decay_keys:
            p -= lr * weight_decay * p
    return params, state


def _flatten(mlp, log_rho):
    flat = {}
    for l, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
        flat[f"W{l}"] = W
        flat[f"b{l}"] = b
    if log_rho is not None:
        flat["log_rho"] = log_rho
    return flat


def train_pipeline1(g, boundary, features, pot, solver_cfg, train_cfg):
    """Learn the MLP initial condition (and optionally log rho).

    Returns (MlpParams, PotentialParams, loss_history). Deterministic for a
    fixed (seed, config, inputs).
    """
    features = np.asarray(features, dtype=np.float64)
    K = boundary.n_classes
    if solver_cfg.clamp_boundary:
        solver_cfg = with_clamping(solver_cfg, False)
    mlp = mlp_init(features.shape[1], train_cfg.hidden_sizes, K, train_cfg.seed)
    if train_cfg.learn_rho:
        alpha = pot.alpha if pot.mode == "fixed_alpha" else 0.0
        init = pot.log_rho if pot.mode == "learned" else alpha * np.log(degrees(g))
        pot = PotentialParams(mode="learned", log_rho=np.asarray(init, dtype=np.float64).copy())
    log_rho = pot.log_rho if train_cfg.learn_rho else None
    params = _flatten(mlp, log_rho)
    decay_keys = tuple(k for k in params if k.startswith("W"))
    state = AdamState()
    rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 0xD0]))
    history = []
    for _ in range(train_cfg.epochs):
        masks = dropout_masks(rng, mlp, features.shape[0], train_cfg.dropout)
        loss, grads = loss_and_gradients(
            g, boundary, features, mlp, pot, solver_cfg, train_cfg, masks
        )
        history.append(loss)
        gflat = _flatten(
            MlpParams(weights=grads["weights"], biases=grads["biases"]),
            grads["log_rho"],
        )
        adam_step(params, gflat, state, train_cfg.lr,
                  weight_decay=train_cfg.weight_decay, decay_keys=decay_keys)
    return mlp, pot, history


def save_checkpoint(path, mlp, pot, solver_cfg, train_cfg, seed):
    """JSON checkpoint; round-trips float64 exactly."""
    blob = {
        "mlp": {
            "weights": [W.tolist() for W in mlp.weights],
            "biases": [b.tolist() for b in mlp.biases],
        },
        "potential": {
            "mode": pot.mode,
            "alpha": pot.alpha,
            "log_rho": None if pot.log_rho is None else pot.log_rho.tolist(),
        },
        "solver_config": {
            "p": "inf" if solver_cfg.p == math.inf else solver_cfg.p,
            "step_size": solver_cfg.step_size,
            "snapshot_times": list(solver_cfg.snapshot_times),
            "clamp_boundary": solver_cfg.clamp_boundary,
            "steady_tol": solver_cfg.steady_tol,
            "max_sweeps": solver_cfg.max_sweeps,
        },
        "train_config": {
            "epochs": train_cfg.epochs,
            "lr": train_cfg.lr,
            "weight_decay": train_cfg.weight_decay,
            "dropout": train_cfg.dropout,
            "hidden_sizes": list(train_cfg.hidden_sizes),
            "learn_rho": train_cfg.learn_rho,
            "loss_kind": train_cfg.loss_kind,
            "seed": train_cfg.seed,
        },
        "seed": seed,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    mlp = MlpParams(
        weights=[np.asarray(W) for W in blob["mlp"]["weights"]],
        biases=[np.asarray(b) for b in blob["mlp"]["biases"]],
    )
    potblob = blob["potential"]
    pot = PotentialParams(
        mode=potblob["mode"],
        alpha=potblob["alpha"],
        log_rho=None if potblob["log_rho"] is None else np.asarray(potblob["log_rho"]),
    )
    sc = blob["solver_config"]
    solver_cfg = SolverConfig(
        p=math.inf if sc["p"] == "inf" else sc["p"],
        step_size=sc["step_size"],
        snapshot_times=tuple(sc["snapshot_times"]),
        clamp_boundary=sc["clamp_boundary"],
        steady_tol=sc["steady_tol"],
        max_sweeps=sc["max_sweeps"],
    )
    tc = blob["train_config"]
    train_cfg = TrainConfig(
        epochs=tc["epochs"], lr=tc["lr"], weight_decay=tc["weight_decay"],
        dropout=tc["dropout"], hidden_sizes=tuple(tc["hidden_sizes"]),
        learn_rho=tc["learn_rho"], loss_kind=tc["loss_kind"], seed=tc["seed"],
    )
    return mlp, pot, solver_cfg, train_cfg, blob["seed"]
