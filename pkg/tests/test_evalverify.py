import numpy as np
import pytest

from conftest import tone
from rfembed import evalverify, featstat
from rfembed.errors import ValidationError
from rfembed.evalverify import ClassifierConfig


# --- pair bookkeeping ---

def test_pair_counts_benchmark_composition():
    labels = np.repeat(np.arange(17), 50)
    labels = np.concatenate([labels, np.full(30, 17)])
    assert evalverify.pair_counts(labels) == (21260, 365500)


def test_pair_counts_single_class():
    assert evalverify.pair_counts([3] * 7) == (21, 0)


def test_pair_counts_two_singletons():
    assert evalverify.pair_counts([0, 1]) == (0, 1)


def test_pair_counts_identity_property():
    rng = np.random.default_rng(0)
    for _ in range(20):
        labels = rng.integers(0, 6, size=100)
        same, diff = evalverify.pair_counts(labels)
        assert same + diff == 100 * 99 // 2


def test_pair_counts_needs_two_items():
    with pytest.raises(ValidationError):
        evalverify.pair_counts([0])


# --- verification ---

def two_clusters(rng, spread=0.05, separation=10.0, per_class=30, dim=6):
    a = spread * rng.standard_normal((per_class, dim))
    b = spread * rng.standard_normal((per_class, dim))
    b[:, 0] += separation
    vectors = np.concatenate([a, b])
    labels = np.repeat([0, 1], per_class)
    return vectors, labels


def test_separated_clusters_verify_perfectly():
    vectors, labels = two_clusters(np.random.default_rng(1))
    report = evalverify.pairwise_verify(vectors, labels)
    assert report.n_same == 2 * (30 * 29 // 2)
    assert report.n_different == 900
    assert report.tpr_at[1e-3] == 1.0
    assert report.tpr_at[1e-4] == 1.0
    assert not report.degenerate


def test_shuffled_labels_give_chance_tpr():
    rng = np.random.default_rng(2)
    vectors = rng.standard_normal((400, 8))
    labels = rng.integers(0, 4, size=400)
    target = 1e-2
    report = evalverify.pairwise_verify(vectors, labels, fpr_targets=(target,))
    se = np.sqrt(target * (1 - target) / report.n_same)
    assert abs(report.tpr_at[target] - target) <= 3 * se


def test_identical_vectors_flagged_degenerate():
    vectors = np.ones((10, 4))
    labels = np.repeat([0, 1], 5)
    report = evalverify.pairwise_verify(vectors, labels)
    assert report.degenerate
    assert report.tpr_at[1e-3] == 0.0  # zero false-positive budget, all ties


def test_achieved_fpr_within_target_and_tpr_monotone():
    rng = np.random.default_rng(3)
    vectors = rng.standard_normal((150, 5))
    labels = rng.integers(0, 3, size=150)
    targets = (1e-3, 1e-2, 1e-1)
    report = evalverify.pairwise_verify(vectors, labels, fpr_targets=targets)
    for f in targets:
        assert report.fpr_at[f] <= f
    tprs = [report.tpr_at[f] for f in targets]
    assert tprs == sorted(tprs)
    rows = report.table_rows()
    assert [r[0] for r in rows] == list(targets)


def test_cosine_metric_scale_invariant():
    rng = np.random.default_rng(4)
    vectors = rng.standard_normal((120, 6))
    labels = rng.integers(0, 3, size=120)
    a = evalverify.pairwise_verify(vectors, labels, metric="cosine")
    b = evalverify.pairwise_verify(37.5 * vectors, labels, metric="cosine")
    for f in a.fpr_targets:
        assert abs(a.tpr_at[f] - b.tpr_at[f]) < 1e-9


def test_blocked_path_matches_exact(monkeypatch):
    rng = np.random.default_rng(5)
    vectors = rng.standard_normal((120, 6))
    labels = rng.integers(0, 4, size=120)
    exact = evalverify.pairwise_verify(vectors, labels)
    monkeypatch.setattr(evalverify, "_EXACT_BLOCK_LIMIT", 50)
    blocked = evalverify.pairwise_verify(vectors, labels)
    assert exact.tpr_at == blocked.tpr_at
    assert exact.threshold_at == blocked.threshold_at
    assert exact.fpr_at == blocked.fpr_at


def test_verify_input_guards():
    rng = np.random.default_rng(6)
    vectors = rng.standard_normal((10, 3))
    with pytest.raises(ValidationError):
        evalverify.pairwise_verify(vectors, np.zeros(10, dtype=int))
    with pytest.raises(ValidationError):
        evalverify.pairwise_verify(vectors, np.arange(9))
    with pytest.raises(ValidationError):
        evalverify.pairwise_verify(vectors, np.arange(10), metric="manhattan")
    bad = vectors.copy()
    bad[0] = np.nan
    with pytest.raises(ValidationError):
        evalverify.pairwise_verify(bad, np.arange(10))
    zeroed = vectors.copy()
    zeroed[3] = 0.0
    with pytest.raises(ValidationError):
        evalverify.pairwise_verify(zeroed, np.arange(10), metric="cosine")


# --- downstream classifier ---

def test_linearly_separable_classifier():
    rng = np.random.default_rng(7)
    features, labels = two_clusters(rng, spread=0.2, separation=6.0,
                                    per_class=50, dim=8)
    result = evalverify.train_feature_classifier(
        features, labels, ClassifierConfig(epochs=10, seed=1))
    assert result.test_accuracy == 1.0
    assert result.train_accuracy == 1.0


def test_shuffled_features_classify_at_chance():
    rng = np.random.default_rng(8)
    features = rng.standard_normal((400, 10))
    labels = rng.integers(0, 4, size=400)
    result = evalverify.train_feature_classifier(
        features, labels, ClassifierConfig(epochs=10, seed=2))
    assert abs(result.test_accuracy - 0.25) < 0.1


def test_classifier_architecture_and_split():
    rng = np.random.default_rng(9)
    features = rng.standard_normal((18 * 20, 26))
    labels = np.repeat(np.arange(18), 20)
    result = evalverify.train_feature_classifier(
        features, labels, ClassifierConfig(epochs=2, seed=3))
    assert result.model.hidden_weights[0].shape == (128, 26)
    assert result.model.hidden_weights[1].shape == (128, 128)
    assert result.model.head_weight.shape == (18, 128)
    # ceil(0.54 * 20) = 11 training items per class
    assert result.n_train == 18 * 11
    assert result.n_test == 18 * 9


def test_classifier_label_guards():
    rng = np.random.default_rng(10)
    features = rng.standard_normal((40, 4))
    with pytest.raises(ValidationError):
        evalverify.train_feature_classifier(features, np.zeros(40, dtype=int))
    labels = np.repeat([0, 2], 20)  # gap in the label range
    with pytest.raises(ValidationError):
        evalverify.train_feature_classifier(features, labels)


def test_global_scaling_keeps_small_columns_small():
    # Variance-ordered input: a few informative columns plus a long tail
    # of low-variance noise, the shape PCA projections take. Per-column
    # standardization would blow the tail up to unit scale; the global
    # mode must leave the ordering alone and stay a constant vector.
    rng = np.random.default_rng(11)
    informative, labels = two_clusters(rng, spread=0.3, separation=8.0,
                                       per_class=40, dim=4)
    tail = 1e-3 * rng.standard_normal((80, 60))
    features = np.hstack([informative, tail])
    result = evalverify.train_feature_classifier(
        features, labels, ClassifierConfig(epochs=10, scaling="global", seed=4))
    assert result.test_accuracy == 1.0
    assert np.ptp(result.feature_std) == 0.0
    assert result.feature_std[0] > 0.1  # set by the informative columns


def test_classifier_rejects_unknown_scaling():
    rng = np.random.default_rng(12)
    features, labels = two_clusters(rng)
    with pytest.raises(ValidationError, match="scaling"):
        evalverify.train_feature_classifier(
            features, labels, ClassifierConfig(scaling="zscore"))


# --- 2-D projection ---

def test_project_2d_collinear():
    direction = np.array([1.0, 2.0, -1.0, 0.5])
    points = np.outer(np.linspace(-3, 3, 11), direction)
    coords = evalverify.project_2d(points)
    assert coords.shape == (11, 2)
    assert np.max(np.abs(coords[:, 1])) < 1e-9


def test_project_2d_rotation_preserves_distances():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((40, 5))
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    from scipy.spatial.distance import pdist

    before = pdist(evalverify.project_2d(x))
    after = pdist(evalverify.project_2d(x @ q.T))
    assert np.max(np.abs(before - after)) < 1e-6


def test_project_2d_needs_three_rows():
    with pytest.raises(ValidationError):
        evalverify.project_2d(np.zeros((2, 4)))


# --- robustness sweep ---

def test_snr_sweep_degrades_from_clean():
    rng = np.random.default_rng(12)
    signals, labels = [], []
    for cls, freq in enumerate((0.1, 0.23)):
        for _ in range(6):
            jitter = 1e-3 * rng.standard_normal()
            signals.append(tone(freq + jitter, 2048))
            labels.append(cls)
    results = evalverify.robustness_sweep(
        signals, labels, featstat.mod_features, "snr", [np.inf, -3.0],
        bandwidths=[0.5] * len(signals), fpr_targets=(1e-1,), seed=1)
    assert [value for value, _ in results] == [np.inf, -3.0]
    clean, noisy = (report.tpr_at[1e-1] for _, report in results)
    assert clean >= noisy
    assert len(evalverify.sweep_table(results)) == 2


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ValidationError):
        evalverify.robustness_sweep([], [], featstat.mod_features,
                                    "bandwidth", [1.0])
