"""Verification and downstream evaluation over any representation.

One-to-one verification treats every unordered pair of items as a trial:
same-class pairs should sit below a distance threshold, different-class
pairs above it. Thresholds are selected per requested false-positive rate
as the largest observed distance whose FPR stays at or under the target
(pairs exactly at the threshold count as positive; the selection never
exceeds the target). Also here: impairment robustness sweeps, the
feature-input classifier built on the embednet trainer, and a 2-D
projection helper for quick looks at a representation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist, pdist

from . import embednet, featcsp, impair
from .errors import ValidationError
from .seeds import EVAL_STREAM, rng_for

log = logging.getLogger(__name__)

DEFAULT_FPR_TARGETS = (1e-3, 1e-4)
_EXACT_BLOCK_LIMIT = 5000


def pair_counts(labels):
    """Same-class and different-class unordered pair counts."""
    y = np.asarray(labels)
    n = len(y)
    if n < 2:
        raise ValidationError(f"need at least 2 items, got {n}")
    _, sizes = np.unique(y, return_counts=True)
    same = int(np.sum(sizes * (sizes - 1) // 2))
    total = n * (n - 1) // 2
    return same, total - same


@dataclass(frozen=True)
class VerificationReport:
    metric: str
    n_same: int
    n_different: int
    fpr_targets: tuple
    tpr_at: dict
    threshold_at: dict
    fpr_at: dict
    degenerate: bool

    def table_rows(self):
        """Plot-ready rows: (target fpr, tpr, achieved fpr, threshold)."""
        return [(f, self.tpr_at[f], self.fpr_at[f], self.threshold_at[f])
                for f in self.fpr_targets]


def _pair_distances(vectors: np.ndarray, labels: np.ndarray, metric: str):
    """Sorted same-class and different-class distance arrays.

    Exact for any size; above _EXACT_BLOCK_LIMIT items the computation
    runs over row blocks so the full square matrix is never formed (the
    distances themselves still all exist in memory once, which is the
    real bound at large N).
    """
    n = len(vectors)
    if n <= _EXACT_BLOCK_LIMIT:
        dists = pdist(vectors, metric=metric)
        ii, jj = np.triu_indices(n, k=1)
        same_mask = labels[ii] == labels[jj]
        same = dists[same_mask]
        diff = dists[~same_mask]
    else:
        block = 1024
        same_parts, diff_parts = [], []
        for start in range(0, n, block):
            stop = min(start + block, n)
            d = cdist(vectors[start:stop], vectors, metric=metric)
            for r in range(stop - start):
                i = start + r
                row = d[r, i + 1:]
                mask = labels[i + 1:] == labels[i]
                same_parts.append(row[mask])
                diff_parts.append(row[~mask])
        same = np.concatenate(same_parts)
        diff = np.concatenate(diff_parts)
    return np.sort(same), np.sort(diff)


def pairwise_verify(vectors, labels, metric: str = "euclidean",
                    fpr_targets=DEFAULT_FPR_TARGETS) -> VerificationReport:
    """Exact TPR at fixed FPR over all unordered pairs."""
    x = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or len(x) != len(y):
        raise ValidationError("vectors must be N x D with one label per row")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite representation entries")
    if metric not in ("euclidean", "cosine"):
        raise ValidationError(f"unsupported metric: {metric}")
    if metric == "cosine" and np.any(np.linalg.norm(x, axis=1) == 0.0):
        raise ValidationError("cosine metric requires nonzero vectors")
    if len(np.unique(y)) < 2:
        raise ValidationError("verification needs at least 2 classes")

    same, diff = _pair_distances(x, y, metric)
    n_same, n_diff = len(same), len(diff)
    all_sorted = np.sort(np.concatenate([same, diff]))
    degenerate = bool(all_sorted[0] == all_sorted[-1])

    tpr_at, thr_at, fpr_at = {}, {}, {}
    for f in fpr_targets:
        max_fp = int(np.floor(f * n_diff))
        # Largest observed distance keeping the false-positive count
        # (different-class pairs at or below it) within budget.
        candidates = all_sorted[
            np.searchsorted(diff, all_sorted, side="right") <= max_fp]
        if len(candidates):
            thr = float(candidates[-1])
        else:
            thr = float(np.nextafter(all_sorted[0], -np.inf))
        fp = int(np.searchsorted(diff, thr, side="right"))
        tp = int(np.searchsorted(same, thr, side="right"))
        thr_at[f] = thr
        tpr_at[f] = tp / n_same
        fpr_at[f] = fp / n_diff

    return VerificationReport(
        metric=metric, n_same=n_same, n_different=n_diff,
        fpr_targets=tuple(fpr_targets), tpr_at=tpr_at,
        threshold_at=thr_at, fpr_at=fpr_at, degenerate=degenerate)


def robustness_sweep(signals, labels, extract, axis: str, grid,
                     base: impair.ImpairmentConfig | None = None,
                     bandwidths=None, sample_rate: float = 1.0,
                     metric: str = "euclidean",
                     fpr_targets=DEFAULT_FPR_TARGETS, seed: int = 0):
    """Re-impairs clean signals along one axis and verifies each point.

    axis is one of snr, sigma_rfo, channel; grid holds the axis values
    (dB numbers, offset sigmas, or channel model names). extract maps a
    complex sample array to a representation vector. Returns a list of
    (value, VerificationReport) in grid order.
    """
    if axis not in ("snr", "sigma_rfo", "channel"):
        raise ValidationError(f"unknown sweep axis: {axis}")
    base = base or impair.ImpairmentConfig()
    y = np.asarray(labels)
    results = []
    for g_idx, value in enumerate(grid):
        if axis == "snr":
            cfg = replace(base, snr_db=float(value))
        elif axis == "sigma_rfo":
            cfg = replace(base, cfo=None, sigma_rfo=float(value))
        else:
            cfg = replace(base, channel=str(value))
        reps = []
        for s_idx, samples in enumerate(signals):
            rng = rng_for(seed, EVAL_STREAM, g_idx, s_idx)
            sig = impair.ComplexSignal(np.asarray(samples, dtype=complex),
                                       sample_rate)
            bw = None if bandwidths is None else bandwidths[s_idx]
            out = impair.apply_impairments(sig, cfg, rng,
                                           occupied_bandwidth=bw)
            reps.append(extract(out.samples))
        report = pairwise_verify(np.array(reps), y, metric=metric,
                                 fpr_targets=fpr_targets)
        log.info("sweep %s=%s tpr=%s", axis, value, report.tpr_at)
        results.append((value, report))
    return results


def sweep_table(results, fpr_targets=None):
    """Delimited-table rows (axis value, fpr target, tpr, threshold)."""
    rows = []
    for value, report in results:
        targets = fpr_targets or report.fpr_targets
        for f in targets:
            rows.append((value, f, report.tpr_at[f], report.threshold_at[f]))
    return rows


@dataclass(frozen=True)
class ClassifierResult:
    model: embednet.EmbedModel
    feature_mean: np.ndarray
    feature_std: np.ndarray
    train_accuracy: float
    test_accuracy: float
    n_train: int
    n_test: int


@dataclass
class ClassifierConfig:
    hidden: tuple = (128, 128)
    epochs: int = 40
    batch_size: int = 64
    lr: float = 0.05
    train_fraction: float = 0.54
    scaling: str = "per_feature"
    seed: int = 0


def _stratified_split(labels, fraction: float, rng):
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        cut = int(np.ceil(fraction * len(members)))
        train_idx.extend(members[:cut])
        test_idx.extend(members[cut:])
    return np.sort(train_idx), np.sort(test_idx)


def classifier_predict(result: ClassifierResult, features) -> np.ndarray:
    x = (np.asarray(features, dtype=np.float64) - result.feature_mean) \
        / result.feature_std
    _, logits = embednet.forward(result.model, x)
    return np.argmax(logits, axis=-1)


def train_feature_classifier(features, labels,
                             config: ClassifierConfig | None = None,
                             train_config: embednet.TrainConfig | None = None):
    """Softmax classifier on fixed feature vectors, with a held-out split.

    Features are centered and scaled with train-split statistics; the
    network is the embednet dense stack (hidden sizes from config) with a
    plain softmax head, trained by the shared SGD loop.

    config.scaling picks the denominator: "per_feature" divides each
    column by its own standard deviation and suits raw statistics whose
    natural scales differ; "global" divides every column by one shared
    RMS, which keeps variance-ordered projections (PCA outputs) intact
    instead of inflating their noise-dominated tail components.
    """
    config = config or ClassifierConfig()
    if config.scaling not in ("per_feature", "global"):
        raise ValidationError(
            f"scaling must be 'per_feature' or 'global', got {config.scaling!r}")
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValidationError("need at least 2 classes")
    if not np.array_equal(classes, np.arange(len(classes))):
        raise ValidationError("labels must be 0..C-1")

    rng = np.random.default_rng(config.seed)
    train_idx, test_idx = _stratified_split(y, config.train_fraction, rng)
    missing = set(classes) - set(y[train_idx])
    if missing:
        raise ValidationError(f"classes absent from train split: {missing}")

    mean = x[train_idx].mean(axis=0)
    if config.scaling == "global":
        rms = float(np.sqrt(np.mean((x[train_idx] - mean) ** 2)))
        std = np.full(x.shape[1], max(rms, 1e-8))
    else:
        std = np.maximum(x[train_idx].std(axis=0), 1e-8)
    xs = (x - mean) / std

    model = embednet.init_model(
        x.shape[1], len(classes), embednet.HeadKind.SOFTMAX,
        hidden=config.hidden, seed=config.seed)
    tc = train_config or embednet.TrainConfig(
        epochs=config.epochs, batch_size=config.batch_size, lr=config.lr,
        lr_drop_epochs=(int(config.epochs * 0.75), int(config.epochs * 0.9)),
        seed=config.seed)
    embednet.train(model, lambda epoch: (xs[train_idx], y[train_idx]), tc)

    def accuracy(idx):
        if len(idx) == 0:
            return float("nan")
        _, logits = embednet.forward(model, xs[idx])
        return float(np.mean(np.argmax(logits, axis=-1) == y[idx]))

    result = ClassifierResult(
        model=model, feature_mean=mean, feature_std=std,
        train_accuracy=accuracy(train_idx), test_accuracy=accuracy(test_idx),
        n_train=len(train_idx), n_test=len(test_idx))
    log.info("classifier train acc %.3f test acc %.3f",
             result.train_accuracy, result.test_accuracy)
    return result


def project_2d(vectors) -> np.ndarray:
    """Deterministic 2-D PCA view of a representation set."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) < 3:
        raise ValidationError("need at least 3 vectors")
    model = featcsp.pca_fit(list(x), k=2)
    return np.stack([featcsp.pca_project(model, v) for v in x])
