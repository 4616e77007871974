import numpy as np
import pytest

from lggd.backbone import (
    GcnConfig,
    GcnModel,
    LogisticModel,
    evaluate,
    normalize_adjacency,
    predict_proba,
    train_gcn,
    train_logistic,
)
from lggd.data import SplitSpec, gen_sbm, make_splits
from lggd.errors import EmptySplit, ShapeMismatch, TrainingDiverged
from lggd.graph import build_graph

from conftest import random_connected_graph


def easy_dataset(seed=0):
    # well-separated two-block graph: any sensible learner gets this right
    ds = gen_sbm(40, 2, 0.3, 0.02, feature_dim=4, feature_noise=0.3, seed=seed)
    split = make_splits(ds.labels, (0.3, 0.2, 0.5), seed=seed)
    return ds, split


class TestNormalizeAdjacency:
    def test_triangle_values(self):
        g = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
        ahat = normalize_adjacency(g).toarray()
        np.testing.assert_allclose(ahat, np.full((3, 3), 1.0 / 3.0), atol=1e-12)

    def test_symmetric_with_unit_top_eigenvalue(self):
        rng = np.random.default_rng(1)
        g = random_connected_graph(rng, 10, 8)
        ahat = normalize_adjacency(g).toarray()
        np.testing.assert_allclose(ahat, ahat.T, atol=1e-12)
        eig = np.linalg.eigvalsh(ahat)
        assert eig.max() == pytest.approx(1.0, abs=1e-9)


class TestTrainGcn:
    def test_learns_easy_problem(self):
        ds, split = easy_dataset()
        cfg = GcnConfig(hidden=8, max_epochs=200, patience=50, seed=0)
        model, curve = train_gcn(ds.graph, ds.features, ds.labels, split, cfg)
        acc = evaluate(model, ds.graph, ds.features, ds.labels, split.test)
        assert acc >= 0.9
        assert len(curve) <= 200

    def test_deterministic(self):
        ds, split = easy_dataset()
        cfg = GcnConfig(hidden=8, max_epochs=20, patience=20, seed=3)
        m1, c1 = train_gcn(ds.graph, ds.features, ds.labels, split, cfg)
        m2, c2 = train_gcn(ds.graph, ds.features, ds.labels, split, cfg)
        np.testing.assert_array_equal(m1.W0, m2.W0)
        assert c1 == c2

    def test_early_stopping_keeps_best(self):
        ds, split = easy_dataset()
        cfg = GcnConfig(hidden=8, max_epochs=300, patience=10, seed=0)
        model, curve = train_gcn(ds.graph, ds.features, ds.labels, split, cfg)
        best_val = max(curve)
        got_val = evaluate(model, ds.graph, ds.features, ds.labels, split.val)
        assert got_val == pytest.approx(best_val)

    def test_empty_split_rejected(self):
        ds, split = easy_dataset()
        bad = SplitSpec(train=np.array([], dtype=np.int64), val=split.val,
                        test=split.test)
        with pytest.raises(EmptySplit):
            train_gcn(ds.graph, ds.features, ds.labels, bad, GcnConfig(max_epochs=1, patience=1))

    def test_feature_row_mismatch_rejected(self):
        ds, split = easy_dataset()
        with pytest.raises(ShapeMismatch):
            train_gcn(ds.graph, ds.features[:-1], ds.labels, split,
                      GcnConfig(max_epochs=1, patience=1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self):
        ds, split = easy_dataset()
        cfg = GcnConfig(hidden=4, max_epochs=50, patience=50, seed=0, lr=1e150)
        with pytest.raises(TrainingDiverged):
            train_gcn(ds.graph, ds.features * 1e160, ds.labels, split, cfg)

    def test_patience_must_fit(self):
        with pytest.raises(ValueError):
            GcnConfig(max_epochs=5, patience=10)


class TestPredictEvaluate:
    def test_proba_rows_sum_to_one(self):
        ds, split = easy_dataset()
        cfg = GcnConfig(hidden=8, max_epochs=20, patience=20, seed=0)
        model, _ = train_gcn(ds.graph, ds.features, ds.labels, split, cfg)
        proba = predict_proba(model, ds.graph, ds.features)
        assert proba.shape == (ds.graph.n_nodes, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_evaluate_empty_rejected(self):
        ds, split = easy_dataset()
        model = GcnModel(W0=np.zeros((4, 2)), b0=np.zeros(2),
                         W1=np.zeros((2, 2)), b1=np.zeros(2))
        with pytest.raises(EmptySplit):
            evaluate(model, ds.graph, ds.features, ds.labels, [])


class TestLogistic:
    def test_learns_linearly_separable(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((100, 2))
        y = (X[:, 0] + X[:, 1] > 0).astype(np.int64)
        split = SplitSpec(train=np.arange(60), val=np.arange(60, 80),
                          test=np.arange(80, 100))
        cfg = GcnConfig(max_epochs=300, patience=100, dropout=0.0, seed=0)
        model = train_logistic(X, y, split, cfg)
        pred = np.argmax(model.logits(X[split.test]), axis=1)
        assert np.mean(pred == y[split.test]) >= 0.9

    def test_gcn_beats_logistic_when_signal_is_structural(self):
        # features carry almost no signal; only the graph separates classes
        ds = gen_sbm(40, 2, 0.3, 0.01, feature_dim=4, feature_noise=5.0, seed=1)
        split = make_splits(ds.labels, (0.3, 0.2, 0.5), seed=1)
        cfg = GcnConfig(hidden=8, max_epochs=300, patience=100, seed=0)
        gcn, _ = train_gcn(ds.graph, ds.features, ds.labels, split, cfg)
        logit = train_logistic(ds.features, ds.labels, split, cfg)
        acc_g = evaluate(gcn, ds.graph, ds.features, ds.labels, split.test)
        pred = np.argmax(logit.logits(ds.features[split.test]), axis=1)
        acc_l = float(np.mean(pred == ds.labels[split.test]))
        assert acc_g > acc_l
