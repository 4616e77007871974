"""Command-line entry point for reproducible experiments.

Config precedence: CLI flags > --config JSON file > built-in defaults. Every
run writes the fully resolved configuration next to its outputs. All
randomness derives from --seed through numpy SeedSequence spawning.
"""

import argparse
import json
import math
import os
import statistics
import sys

import numpy as np

from .backbone import GcnConfig, evaluate, train_gcn, train_logistic
from .data import gen_unit_ball_graph, corrupt_edges, load_dataset, SplitSpec
from .errors import ConfigError, LggdError
from .graph import PotentialParams, load_graph, potential_eval
from .learn import TrainConfig, load_checkpoint, save_checkpoint, train_pipeline1
from .pipelines import (
    generate_ggd,
    generate_lggd,
    include_new_labels,
    load_features,
    save_features,
    zscore,
)
from .render import render_distance_map
from .solver import (
    BoundarySpec,
    SolverConfig,
    dijkstra,
    distance_map_distortion,
    solve_steady,
)


def _write_json(path, payload):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    os.replace(tmp, path)


def _parse_times(text):
    return tuple(float(t) for t in str(text).split(","))


def _parse_p(text):
    if str(text) in ("inf", "Infinity"):
        return math.inf
    p = float(text)
    return int(p) if p == 1 else p


_DEFAULTS = {
    "ggd": {
        "alpha": 0.0, "p": "1", "step_size": 0.1, "times": "1,2,3,4,5",
    },
    "train": {
        "alpha": 0.0, "p": "1", "step_size": 0.1, "times": "1,2,3,4,5",
        "epochs": 150, "lr": 0.01, "weight_decay": 0.0005, "dropout": 0.5,
        "hidden": "64", "learn_rho": False, "loss_kind": "cross_entropy",
    },
    "lggd": {},
    "classify": {
        "backbone": "gcn", "hidden": 32, "dropout": 0.5, "lr": 0.01,
        "weight_decay": 1e-6, "max_epochs": 5000, "patience": 100,
        "feature_variant": "lggd", "raw_features": False, "zscore": False,
    },
    # dynamic z-scores features by default: a frozen backbone must see a
    # scale-stable input when the boundary (and hence the distance scale) grows
    "dynamic": {
        "hidden": 32, "dropout": 0.5, "lr": 0.01, "weight_decay": 1e-6,
        "max_epochs": 5000, "patience": 100, "zscore": True,
    },
    "robustness": {
        "n": 2000, "eps": 0.12, "corrupt": "10,100,1000", "seeds": 5,
        "alpha": 0.0, "steady_tol": 1e-6,
    },
    "render": {},
}


def _build_parser():
    parser = argparse.ArgumentParser(prog="lggd")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, paths):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with defaults for this run")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=".")
        for path in paths:
            p.add_argument(f"--{path}", required=True)
        for key, default in _DEFAULTS[name].items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, dest=key, action="store_true", default=None)
                p.add_argument(f"--no-{key.replace('_', '-')}", dest=key,
                               action="store_false", default=None)
            else:
                p.add_argument(flag, type=type(default), default=None)
        return p

    add("ggd", "generate distance features from the default init", ("graph", "labels", "split"))
    add("train", "learn the initial-condition MLP (and optionally rho)",
        ("graph", "features", "labels", "split"))
    add("lggd", "generate features from a trained checkpoint",
        ("graph", "features", "labels", "split", "checkpoint"))
    add("classify", "train/evaluate a backbone on feature CSVs",
        ("graph", "features", "labels", "split"))
    add("dynamic", "tranche-wise label inclusion with a frozen backbone",
        ("graph", "features", "labels", "split", "checkpoint"))
    add("robustness", "edge-corruption distortion of p=1 vs Dijkstra maps", ())
    add("render", "distance map to SVG", ("positions", "field", "out"))
    return parser


def _resolve(args):
    """Flags > config file > defaults; unknown config keys rejected."""
    cfg = dict(_DEFAULTS[args.command])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            user = json.load(fh)
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    for key in cfg:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            cfg[key] = flag_val
    cfg["seed"] = args.seed
    cfg["out_dir"] = args.out_dir
    return cfg


def _load_split(path):
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    tranches = [np.asarray(blob[k], dtype=np.int64)
                for k in sorted(blob) if k.startswith("nl")]
    return SplitSpec(
        train=np.asarray(blob["train"], dtype=np.int64),
        val=np.asarray(blob["val"], dtype=np.int64),
        test=np.asarray(blob["test"], dtype=np.int64),
        new_tranches=tranches,
    )


def _load_labels(path):
    with open(path, encoding="utf-8") as fh:
        return np.asarray([int(line) for line in fh if line.strip()], dtype=np.int64)


def _solver_cfg(cfg, clamp=True):
    return SolverConfig(
        p=_parse_p(cfg["p"]), step_size=float(cfg["step_size"]),
        snapshot_times=_parse_times(cfg["times"]), clamp_boundary=clamp,
    )


def _emit_config(cfg, command):
    os.makedirs(cfg["out_dir"], exist_ok=True)
    _write_json(os.path.join(cfg["out_dir"], "resolved_config.json"),
                {"command": command, **cfg})


def _cmd_ggd(args):
    cfg = _resolve(args)
    _emit_config(cfg, "ggd")
    g = load_graph(args.graph)
    labels = _load_labels(args.labels)
    split = _load_split(args.split)
    boundary = BoundarySpec.from_labels(split.train, labels, int(labels.max()) + 1)
    fm = generate_ggd(g, boundary, PotentialParams(alpha=float(cfg["alpha"])),
                      _solver_cfg(cfg))
    save_features(fm, os.path.join(cfg["out_dir"], "features.csv"), boundary)
    return 0


def _cmd_train(args):
    cfg = _resolve(args)
    _emit_config(cfg, "train")
    g = load_graph(args.graph)
    labels = _load_labels(args.labels)
    features = np.loadtxt(args.features, delimiter=",", ndmin=2)
    split = _load_split(args.split)
    boundary = BoundarySpec.from_labels(split.train, labels, int(labels.max()) + 1)
    train_cfg = TrainConfig(
        epochs=int(cfg["epochs"]), lr=float(cfg["lr"]),
        weight_decay=float(cfg["weight_decay"]), dropout=float(cfg["dropout"]),
        hidden_sizes=tuple(int(h) for h in str(cfg["hidden"]).split(",")),
        learn_rho=bool(cfg["learn_rho"]), loss_kind=cfg["loss_kind"],
        seed=cfg["seed"],
    )
    solver_cfg = _solver_cfg(cfg, clamp=False)
    pot = PotentialParams(alpha=float(cfg["alpha"]))
    mlp, pot, history = train_pipeline1(g, boundary, features, pot,
                                        solver_cfg, train_cfg)
    out = cfg["out_dir"]
    save_checkpoint(os.path.join(out, "checkpoint.json"),
                    mlp, pot, solver_cfg, train_cfg, cfg["seed"])
    _write_json(os.path.join(out, "loss_history.json"), history)
    return 0


def _cmd_lggd(args):
    cfg = _resolve(args)
    _emit_config(cfg, "lggd")
    g = load_graph(args.graph)
    labels = _load_labels(args.labels)
    features = np.loadtxt(args.features, delimiter=",", ndmin=2)
    split = _load_split(args.split)
    boundary = BoundarySpec.from_labels(split.train, labels, int(labels.max()) + 1)
    mlp, pot, solver_cfg, _, _ = load_checkpoint(args.checkpoint)
    fm = generate_lggd(g, boundary, features, mlp, pot, solver_cfg)
    save_features(fm, os.path.join(cfg["out_dir"], "features.csv"), boundary)
    return 0


def _gcn_cfg(cfg):
    return GcnConfig(
        hidden=int(cfg["hidden"]), dropout=float(cfg["dropout"]),
        lr=float(cfg["lr"]), weight_decay=float(cfg["weight_decay"]),
        max_epochs=int(cfg["max_epochs"]), patience=int(cfg["patience"]),
        seed=cfg["seed"],
    )


def _cmd_classify(args):
    cfg = _resolve(args)
    _emit_config(cfg, "classify")
    g = load_graph(args.graph)
    labels = _load_labels(args.labels)
    split = _load_split(args.split)
    if cfg["raw_features"]:
        X = np.loadtxt(args.features, delimiter=",", ndmin=2)
    else:
        fm = load_features(args.features)
        if cfg["zscore"]:
            fm = zscore(fm)
        X = fm.values
    gcn_cfg = _gcn_cfg(cfg)
    if cfg["backbone"] == "gcn":
        model, val_curve = train_gcn(g, X, labels, split, gcn_cfg)
        epochs_run = len(val_curve)
        acc_val = evaluate(model, g, X, labels, split.val)
        acc_test = evaluate(model, g, X, labels, split.test)
    elif cfg["backbone"] == "logistic":
        model = train_logistic(X, labels, split, gcn_cfg)
        epochs_run = gcn_cfg.max_epochs
        acc_val = float(np.mean(np.argmax(model.logits(X[split.val]), axis=1)
                                == labels[split.val]))
        acc_test = float(np.mean(np.argmax(model.logits(X[split.test]), axis=1)
                                 == labels[split.test]))
    else:
        raise ConfigError(f"unknown backbone {cfg['backbone']!r}")
    _write_json(os.path.join(cfg["out_dir"], "metrics.json"), {
        "accuracy_test": acc_test,
        "accuracy_val": acc_val,
        "epochs_run": epochs_run,
        "seed": cfg["seed"],
        "feature_variant": cfg["feature_variant"],
    })
    return 0


def _cmd_dynamic(args):
    cfg = _resolve(args)
    _emit_config(cfg, "dynamic")
    g = load_graph(args.graph)
    labels = _load_labels(args.labels)
    content = np.loadtxt(args.features, delimiter=",", ndmin=2)
    split = _load_split(args.split)
    if not split.new_tranches:
        raise ConfigError("split file has no nl* tranches")
    K = int(labels.max()) + 1
    boundary = BoundarySpec.from_labels(split.train, labels, K)
    mlp, pot, solver_cfg, _, _ = load_checkpoint(args.checkpoint)
    fm = generate_lggd(g, boundary, content, mlp, pot, solver_cfg)

    def backbone_input(fmat):
        return zscore(fmat).values if cfg["zscore"] else fmat.values

    X0 = backbone_input(fm)
    model, _ = train_gcn(g, X0, labels, split, _gcn_cfg(cfg))
    rows = [{
        "tranche": 0,
        "n_new_labels": 0,
        "accuracy_test": evaluate(model, g, X0, labels, split.test),
    }]
    new_nodes = []
    for i, tranche in enumerate(split.new_tranches, start=1):
        new_nodes.extend(int(x) for x in tranche)
        v1 = BoundarySpec.from_labels(new_nodes, labels, K)
        fm_i = include_new_labels(g, boundary, v1, content, mlp, pot, solver_cfg)
        rows.append({
            "tranche": i,
            "n_new_labels": len(new_nodes),
            "accuracy_test": evaluate(model, g, backbone_input(fm_i), labels, split.test),
        })
    _write_json(os.path.join(cfg["out_dir"], "dynamic_metrics.json"), rows)
    return 0


def run_robustness(n, eps, corrupt_levels, n_seeds, alpha, master_seed=0,
                   steady_tol=1e-6):
    """Fig.-2-style protocol: distortion of the p=1 steady map vs the Dijkstra
    map under random edge corruption. Returns per-run rows and medians."""
    rows = []
    seeds = np.random.SeedSequence(master_seed).spawn(n_seeds)
    for si, ss in enumerate(seeds):
        child = ss.generate_state(2)
        g, _, rim = gen_unit_ball_graph(n, eps, int(child[0]))
        boundary = BoundarySpec((tuple(rim),))
        cfg = SolverConfig(p=1, steady_tol=steady_tol)
        rho = potential_eval(g, PotentialParams(alpha=alpha))
        base_p1 = solve_steady(g, boundary, rho, cfg).values[0, 0]
        base_dj = dijkstra(g, rim)
        for m in corrupt_levels:
            gc = corrupt_edges(g, m, int(child[1]) + m)
            rho_c = potential_eval(gc, PotentialParams(alpha=alpha))
            map_p1 = solve_steady(gc, boundary, rho_c, cfg).values[0, 0]
            map_dj = dijkstra(gc, rim)
            rows.append({
                "seed": si,
                "n_corrupt": m,
                "distortion_p1": distance_map_distortion(base_p1, map_p1),
                "distortion_dijkstra": distance_map_distortion(base_dj, map_dj),
            })
    medians = []
    for m in corrupt_levels:
        sub = [r for r in rows if r["n_corrupt"] == m]
        medians.append({
            "n_corrupt": m,
            "median_distortion_p1": statistics.median(r["distortion_p1"] for r in sub),
            "median_distortion_dijkstra": statistics.median(
                r["distortion_dijkstra"] for r in sub),
        })
    return rows, medians


def _cmd_robustness(args):
    cfg = _resolve(args)
    _emit_config(cfg, "robustness")
    levels = [int(x) for x in str(cfg["corrupt"]).split(",")]
    rows, medians = run_robustness(
        int(cfg["n"]), float(cfg["eps"]), levels, int(cfg["seeds"]),
        float(cfg["alpha"]), master_seed=cfg["seed"],
        steady_tol=float(cfg["steady_tol"]),
    )
    _write_json(os.path.join(cfg["out_dir"], "robustness.json"),
                {"rows": rows, "medians": medians})
    return 0


def _cmd_render(args):
    cfg = _resolve(args)
    _emit_config(cfg, "render")
    positions = np.loadtxt(args.positions, delimiter=",", ndmin=2)
    values = np.loadtxt(args.field, delimiter=",", ndmin=1)
    render_distance_map(positions, values, args.out)
    return 0


_COMMANDS = {
    "ggd": _cmd_ggd,
    "train": _cmd_train,
    "lggd": _cmd_lggd,
    "classify": _cmd_classify,
    "dynamic": _cmd_dynamic,
    "robustness": _cmd_robustness,
    "render": _cmd_render,
}


def run(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LggdError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
