"""End-to-end acceptance checks. Each test prints one [PASS]/[FAIL] line.

The statistical checks (criteria 6-8) share one 10-seed experiment on a
planted-partition benchmark; it runs once per session in a module fixture.
"""

import math
import os
import time

import numpy as np
import pytest

from lggd.backbone import GcnConfig, evaluate, train_gcn
from lggd.cli import run_robustness
from lggd.data import (
    corrupt_edges,
    gen_sbm,
    gen_unit_ball_graph,
    load_dataset,
    make_splits,
)
from lggd.graph import INFINITY_CAP, PotentialParams, potential_eval
from lggd.learn import TrainConfig, loss_and_gradients, mlp_init, train_pipeline1
from lggd.pipelines import generate_ggd, generate_lggd, include_new_labels, zscore
from lggd.solver import BoundarySpec, SolverConfig, dijkstra, integrate, solve_steady

from conftest import random_connected_graph

pytestmark = pytest.mark.filterwarnings("ignore:.*unreachable.*")


def report(capsys, idx, ok, detail):
    with capsys.disabled():
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {idx}: {detail}")
    assert ok, detail


def test_criterion_1_steady_matches_hop_counts(capsys):
    # p=inf, unit weights, constant potential: steady solve is hop distance
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 51))
        g = random_connected_graph(rng, n, int(rng.integers(0, n)))
        m = int(rng.integers(1, max(2, n // 3)))
        sources = rng.choice(n, size=m, replace=False).tolist()
        boundary = BoundarySpec((tuple(sources),))
        cfg = SolverConfig(p=math.inf, steady_tol=1e-12)
        fld = solve_steady(g, boundary, np.ones(n), cfg)
        hops = dijkstra(g, sources)
        worst = max(worst, float(np.abs(fld.values[0, 0] - hops).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    report(capsys, 1, ok,
           f"steady p=inf vs hop counts, 100 graphs: max error {worst:.2e} "
           f"(<= 1e-9), {elapsed:.1f}s (< 10s)")


def test_criterion_2_integrator_closed_form(capsys):
    # one boundary node, one free node, unit edge: f' = 1 - f
    from lggd.graph import build_graph

    g = build_graph(2, [(0, 1, 1.0)])
    boundary = BoundarySpec(((0,),))
    times = tuple(0.5 * k for k in range(1, 11))
    cfg = SolverConfig(p=1, step_size=0.01, snapshot_times=times)
    f0 = INFINITY_CAP
    phi0 = np.array([[0.0, f0]])
    fld = integrate(g, boundary, np.ones(2), phi0, cfg)
    exact = np.array([1.0 + (f0 - 1.0) * math.exp(-t) for t in times])
    got = fld.values[0, :, 1]
    rel = float(np.max(np.abs(got - exact) / exact))
    ok = rel <= 1e-6
    report(capsys, 2, ok,
           f"RK4 vs 1+(f0-1)e^-t on t in (0,5]: max rel error {rel:.2e} (<= 1e-6)")


def test_criterion_3_steady_time_consistency(capsys):
    # long clamped integration from the all-M init relaxes onto the steady map
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(10, 201))
        g = random_connected_graph(rng, n, int(rng.integers(0, n)))
        sources = rng.choice(n, size=int(rng.integers(1, 4)), replace=False)
        boundary = BoundarySpec((tuple(sources.tolist()),))
        rho = np.ones(n)
        cfg = SolverConfig(p=1, step_size=0.1, snapshot_times=(50.0,),
                           clamp_boundary=True, steady_tol=1e-12)
        phi0 = np.full((1, n), INFINITY_CAP)
        phi0[0, sources] = 0.0
        fld_t = integrate(g, boundary, rho, phi0, cfg)
        fld_s = solve_steady(g, boundary, rho, cfg)
        worst = max(worst, float(np.abs(fld_t.values[0, 0] - fld_s.values[0, 0]).max()))
    ok = worst <= 1e-3
    report(capsys, 3, ok,
           f"integrate(t=50) vs steady solve on 20 graphs: max error {worst:.2e} "
           f"(<= 1e-3)")


def test_criterion_4_gradient_correctness(capsys):
    rng = np.random.default_rng(104)
    worst = 0.0
    for trial in range(10):
        n = int(rng.integers(6, 21))
        g = random_connected_graph(rng, n, int(rng.integers(0, n)),
                                   unit_weights=False)
        x = rng.standard_normal((n, 3))
        k0, k1 = rng.choice(n, size=2, replace=False)
        boundary = BoundarySpec(((int(k0),), (int(k1),)))
        mlp = mlp_init(3, (4,), 2, seed=trial)
        pot = PotentialParams(mode="learned",
                              log_rho=rng.standard_normal(n) * 0.2)
        scfg = SolverConfig(p=1, step_size=0.25, snapshot_times=(1.0,),
                            clamp_boundary=False)
        tcfg = TrainConfig(dropout=0.0, learn_rho=True)

        def loss_at():
            lv, _ = loss_and_gradients(g, boundary, x, mlp, pot, scfg, tcfg)
            return lv

        _, grads = loss_and_gradients(g, boundary, x, mlp, pot, scfg, tcfg)
        arrays = (
            [("weights", i, m) for i, m in enumerate(mlp.weights)]
            + [("biases", i, m) for i, m in enumerate(mlp.biases)]
            + [("log_rho", None, pot.log_rho)]
        )
        eps = 1e-6
        for key, li, mat in arrays:
            flat = mat.reshape(-1)
            gflat = (grads[key][li] if li is not None else grads[key]).reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                lp = loss_at()
                flat[idx] = orig - eps
                lm = loss_at()
                flat[idx] = orig
                fd = (lp - lm) / (2 * eps)
                rel = abs(gflat[idx] - fd) / max(abs(fd), abs(gflat[idx]), 1e-6)
                worst = max(worst, rel)
    ok = worst <= 1e-4
    report(capsys, 4, ok,
           f"exact vs finite-difference gradients, 10 instances, every "
           f"parameter: max rel error {worst:.2e} (<= 1e-4)")


def test_criterion_5_corruption_robustness(capsys):
    t0 = time.perf_counter()
    _, medians = run_robustness(2000, 0.12, [10, 100, 1000], n_seeds=5,
                                alpha=0.0, master_seed=105, steady_tol=1e-6)
    elapsed = time.perf_counter() - t0
    ratios = [m["median_distortion_p1"] / m["median_distortion_dijkstra"]
              for m in medians]
    ok = max(ratios) <= 0.5 and elapsed < 120.0
    report(capsys, 5, ok,
           f"p=1 map distortion vs hop-count map under edge corruption: "
           f"ratios {[f'{r:.3f}' for r in ratios]} (each <= 0.5), "
           f"{elapsed:.1f}s (< 2 min)")


N_SEEDS = 10
SBM_KW = dict(n_per_class=300, n_classes=3, p_in=0.02, p_out=0.005,
              feature_dim=16, feature_noise=0.7)
FRACTIONS = (0.025, 0.025, 0.1, 0.1, 0.1, 0.65)
SOLVER_KW = dict(p=1, step_size=0.2, snapshot_times=(1, 2, 3, 4, 5))
TRAIN_EPOCHS = 50
ALPHA = -0.5


def _fit_eval(ds, split, X, seed):
    model, _ = train_gcn(ds.graph, X, ds.labels, split, GcnConfig(seed=seed))
    return evaluate(model, ds.graph, X, ds.labels, split.test)


def _bench_setup(seed):
    ds = gen_sbm(seed=seed, **SBM_KW)
    split = make_splits(ds.labels, FRACTIONS, seed=seed)
    boundary = BoundarySpec.from_labels(split.train, ds.labels, 3)
    return ds, split, boundary


def _seed_core(seed):
    """Default-init vs learned-init accuracy for one seed."""
    ds, split, boundary = _bench_setup(seed)
    scfg = SolverConfig(**SOLVER_KW)
    pot = PotentialParams(alpha=ALPHA)
    fm_g = generate_ggd(ds.graph, boundary, pot, scfg)
    acc_g = _fit_eval(ds, split, fm_g.values, seed)
    mlp, pot_l, _ = train_pipeline1(
        ds.graph, boundary, ds.features, pot, scfg,
        TrainConfig(epochs=TRAIN_EPOCHS, seed=seed),
    )
    fm_l = generate_lggd(ds.graph, boundary, ds.features, mlp, pot_l, scfg)
    acc_l = _fit_eval(ds, split, fm_l.values, seed)
    return acc_g, acc_l, mlp.weights, mlp.biases


def _seed_extra(args):
    """Learned-potential accuracy and the frozen-backbone dynamic curve."""
    seed, weights, biases = args
    from lggd.learn import MlpParams

    mlp = MlpParams(weights=weights, biases=biases)
    ds, split, boundary = _bench_setup(seed)
    scfg = SolverConfig(**SOLVER_KW)
    pot = PotentialParams(alpha=ALPHA)

    mlp_r, pot_r, _ = train_pipeline1(
        ds.graph, boundary, ds.features, pot, scfg,
        TrainConfig(epochs=TRAIN_EPOCHS, learn_rho=True, seed=seed),
    )
    fm_r = generate_lggd(ds.graph, boundary, ds.features, mlp_r, pot_r, scfg)
    acc_r = _fit_eval(ds, split, fm_r.values, seed)

    # dynamic inclusion: frozen backbone on scale-stabilized features
    fm_l = generate_lggd(ds.graph, boundary, ds.features, mlp, pot, scfg)
    X0 = zscore(fm_l).values
    model, _ = train_gcn(ds.graph, X0, ds.labels, split, GcnConfig(seed=seed))
    curve = [evaluate(model, ds.graph, X0, ds.labels, split.test)]
    new_nodes = []
    for tranche in split.new_tranches:
        new_nodes.extend(int(x) for x in tranche)
        v1 = BoundarySpec.from_labels(new_nodes, ds.labels, 3)
        fm_i = include_new_labels(ds.graph, boundary, v1, ds.features,
                                  mlp, pot, scfg)
        curve.append(
            evaluate(model, ds.graph, zscore(fm_i).values, ds.labels, split.test)
        )
    return acc_r, curve


@pytest.fixture(scope="module")
def sbm_runs():
    """10-seed benchmark: GGD vs LGGD vs learned-potential LGGD accuracy,
    plus the frozen-backbone dynamic-label curve.

    Seeds are independent, so they run in parallel worker processes; each
    seed's computation stays deterministic.
    """
    from concurrent.futures import ProcessPoolExecutor

    out = {}
    with ProcessPoolExecutor(max_workers=4) as pool:
        t0 = time.perf_counter()
        core = list(pool.map(_seed_core, range(N_SEEDS)))
        out["core_seconds"] = time.perf_counter() - t0
        extra = list(pool.map(
            _seed_extra, [(s, c[2], c[3]) for s, c in enumerate(core)]
        ))
    out["ggd"] = [c[0] for c in core]
    out["lggd"] = [c[1] for c in core]
    out["rho"] = [e[0] for e in extra]
    out["dynamic"] = [e[1] for e in extra]
    return out


def test_criterion_6_lggd_beats_ggd(capsys, sbm_runs):
    mean_g = float(np.mean(sbm_runs["ggd"]))
    mean_l = float(np.mean(sbm_runs["lggd"]))
    elapsed = sbm_runs["core_seconds"]
    ok = mean_l >= mean_g + 0.02 and elapsed < 600.0
    report(capsys, 6, ok,
           f"learned init vs default init, 10 seeds: mean accuracy "
           f"{mean_l:.3f} vs {mean_g:.3f} (margin >= 0.02), "
           f"{elapsed:.0f}s (< 10 min)")


def test_criterion_7_learned_potential_no_degradation(capsys, sbm_runs):
    mean_l = float(np.mean(sbm_runs["lggd"]))
    mean_r = float(np.mean(sbm_runs["rho"]))
    ok = mean_r >= mean_l - 0.005
    report(capsys, 7, ok,
           f"learned potential, 10 seeds: mean accuracy {mean_r:.3f} vs "
           f"{mean_l:.3f} fixed-alpha (>= mean - 0.005)")


def test_criterion_8_dynamic_inclusion(capsys, sbm_runs):
    curve = np.mean(np.asarray(sbm_runs["dynamic"]), axis=0)
    steps_ok = all(curve[i + 1] >= curve[i] - 0.005 for i in range(len(curve) - 1))
    final_ok = curve[-1] >= curve[0] + 0.01
    ok = steps_ok and final_ok
    report(capsys, 8, ok,
           f"frozen backbone, growing label set, 10 seeds: mean accuracy per "
           f"tranche {[f'{a:.3f}' for a in curve]} (non-degrading steps, "
           f"final >= initial + 0.01)")


def test_criterion_9_integration_scales_with_edges(capsys):
    g1, _, _ = gen_unit_ball_graph(2000, 0.12, seed=109)
    g2 = corrupt_edges(g1, g1.edge_count, seed=109)  # doubles |E|
    rng = np.random.default_rng(109)
    picks = rng.choice(2000, 60, replace=False)
    classes = tuple(tuple(int(x) for x in picks[20 * k:20 * (k + 1)])
                    for k in range(3))
    boundary = BoundarySpec(classes)
    cfg = SolverConfig(p=1, step_size=0.1, snapshot_times=(5.0,))
    phi0 = np.full((3, 2000), INFINITY_CAP)
    for k, cls in enumerate(classes):
        phi0[k, list(cls)] = 0.0

    def timeit(g):
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            integrate(g, boundary, np.ones(2000), phi0, cfg)
            best = min(best, time.perf_counter() - t0)
        return best

    timeit(g1)  # warm-up (JIT compilation, caches)
    t1 = timeit(g1)
    t2 = timeit(g2)
    ok = t2 <= 3.0 * t1
    report(capsys, 9, ok,
           f"integrate wall time at |E|={g1.edge_count} vs {g2.edge_count}: "
           f"{t1 * 1e3:.0f}ms -> {t2 * 1e3:.0f}ms, ratio {t2 / t1:.2f} (<= 3)")


@pytest.mark.skipif("LGGD_CORA_DIR" not in os.environ,
                    reason="set LGGD_CORA_DIR to a directory holding "
                           "graph.tsv, features.csv, labels.txt")
def test_criterion_10_citation_benchmark(capsys):
    root = os.environ["LGGD_CORA_DIR"]
    ds = load_dataset(os.path.join(root, "graph.tsv"),
                      os.path.join(root, "features.csv"),
                      os.path.join(root, "labels.txt"))
    scfg = SolverConfig(p=1, step_size=0.1, snapshot_times=(1, 2, 3, 4, 5))
    pot = PotentialParams(alpha=-0.5)
    lggd_accs, ggd_accs, raw_accs = [], [], []
    for seed in range(10):
        split = make_splits(ds.labels, (0.025, 0.025, 0.95), seed=seed)
        boundary = BoundarySpec.from_labels(split.train, ds.labels, ds.n_classes)
        fm_g = generate_ggd(ds.graph, boundary, pot, scfg)
        ggd_accs.append(_fit_eval(ds, split, fm_g.values, seed))
        mlp, pot_l, _ = train_pipeline1(ds.graph, boundary, ds.features, pot,
                                        scfg, TrainConfig(seed=seed))
        fm_l = generate_lggd(ds.graph, boundary, ds.features, mlp, pot_l, scfg)
        lggd_accs.append(_fit_eval(ds, split, fm_l.values, seed))
        raw_accs.append(_fit_eval(ds, split, ds.features, seed))
    mean_l = float(np.mean(lggd_accs))
    ok = abs(mean_l - 0.8018) <= 0.03 and np.mean(ggd_accs) < np.mean(raw_accs)
    report(capsys, 10, ok,
           f"citation benchmark: learned-init mean accuracy {mean_l:.4f} "
           f"(within 0.03 of 0.8018), default-init below raw-feature baseline")
