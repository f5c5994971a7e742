"""Unsupervised clustering metrics: optimal-assignment accuracy, the reject
option, mode coverage, and a K-means baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .distributions import kl_categorical
from .errors import ConfigError


@dataclass
class ClusterReport:
    confusion: np.ndarray          # (k_pred, k_true) counts, full sample set
    mapping: dict                  # injective pred -> true (full set fit)
    acc: float | None              # accuracy over all samples (None: no labels)
    n: int
    rejected: int
    rejection_rate: float
    acc_accepted: float | None     # accuracy over the accepted set, refit map
    modes_covered: int
    kl_marginal: float

    def format_record(self, gamma: float) -> str:
        acc = "na" if self.acc is None else f"{self.acc:.6f}"
        acc_a = "na" if self.acc_accepted is None else f"{self.acc_accepted:.6f}"
        return (f"gamma={gamma:.4f} n={self.n} rejected={self.rejected} "
                f"rejection_rate={self.rejection_rate:.6f} acc={acc} "
                f"acc_accepted={acc_a} modes={self.modes_covered} "
                f"kl={self.kl_marginal:.6f}")


def hungarian_map(confusion) -> dict:
    """Injective cluster->class assignment maximizing the matched count.

    Solved exactly (Kuhn-Munkres via scipy); rectangular matrices are handled
    directly, assigning min(rows, cols) pairs.
    """
    confusion = np.asarray(confusion)
    if confusion.ndim != 2:
        raise ValueError("confusion must be a 2-d count matrix")
    if np.any(confusion < 0):
        raise ValueError("confusion counts must be nonnegative")
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return {int(r): int(c) for r, c in zip(rows, cols)}


def confusion_matrix(true_labels, cluster_labels, k_pred=None, k_true=None):
    true_labels = np.asarray(true_labels, dtype=np.int64)
    cluster_labels = np.asarray(cluster_labels, dtype=np.int64)
    if true_labels.shape != cluster_labels.shape:
        raise ValueError(
            f"label arrays differ in length: {true_labels.shape} vs "
            f"{cluster_labels.shape}")
    k_pred = int(cluster_labels.max()) + 1 if k_pred is None else k_pred
    k_true = int(true_labels.max()) + 1 if k_true is None else k_true
    conf = np.zeros((k_pred, k_true), dtype=np.int64)
    np.add.at(conf, (cluster_labels, true_labels), 1)
    return conf


def clustering_accuracy(true_labels, cluster_labels, k_pred=None, k_true=None):
    """Fraction of samples whose cluster, under the best one-to-one
    cluster-to-class mapping, lands on their true class.

    Returns (acc, mapping, confusion).
    """
    conf = confusion_matrix(true_labels, cluster_labels, k_pred, k_true)
    mapping = hungarian_map(conf)
    matched = sum(conf[r, c] for r, c in mapping.items())
    n = int(conf.sum())
    return matched / n, mapping, conf


def reject_evaluate(y_probs, true_labels, gamma: float) -> ClusterReport:
    """Evaluate with a reject option: samples whose highest posterior is
    <= gamma are refused. Accuracy on the accepted set uses a mapping refit
    on that set; mode statistics always cover the full set."""
    y_probs = np.asarray(y_probs, dtype=np.float64)
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    n, k = y_probs.shape
    preds = y_probs.argmax(axis=1)  # ties resolve to the lowest index
    accepted = y_probs.max(axis=1) > gamma
    rejected = int(n - accepted.sum())
    modes, kl = mode_coverage(preds, k)

    if true_labels is None:
        return ClusterReport(
            confusion=np.zeros((k, 0), dtype=np.int64), mapping={}, acc=None,
            n=n, rejected=rejected, rejection_rate=rejected / n,
            acc_accepted=None, modes_covered=modes, kl_marginal=kl)

    true_labels = np.asarray(true_labels, dtype=np.int64)
    k_true = int(true_labels.max()) + 1
    acc, mapping, conf = clustering_accuracy(true_labels, preds, k, k_true)
    if accepted.any():
        acc_accepted, _, _ = clustering_accuracy(
            true_labels[accepted], preds[accepted], k, k_true)
    else:
        acc_accepted = None
    return ClusterReport(confusion=conf, mapping=mapping, acc=acc, n=n,
                         rejected=rejected, rejection_rate=rejected / n,
                         acc_accepted=acc_accepted, modes_covered=modes,
                         kl_marginal=kl)


def mode_coverage(cluster_labels, k: int):
    """Distinct clusters used, and KL(empirical frequencies || uniform)."""
    cluster_labels = np.asarray(cluster_labels, dtype=np.int64)
    if cluster_labels.size == 0:
        raise ValueError("mode_coverage of an empty assignment")
    if cluster_labels.min() < 0 or cluster_labels.max() >= k:
        raise ValueError(f"cluster labels must lie in [0, {k})")
    counts = np.bincount(cluster_labels, minlength=k)
    freq = counts / counts.sum()
    uniform = np.full(k, 1.0 / k)
    return int((counts > 0).sum()), kl_categorical(freq, uniform)


def kmeans_fit(data, k: int, seed: int = 0, iters: int = 100):
    """Lloyd's algorithm with k-means++ style seeding.

    Deterministic per seed. An emptied cluster is re-seeded from the point
    currently farthest from its assigned centroid. Returns
    (labels, centers, sse_history); the history is non-increasing.
    """
    data = np.asarray(data, dtype=np.float64)
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    n = data.shape[0]
    if n < k:
        raise ConfigError(f"need at least k={k} points, got {n}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = ((data - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = data[rng.integers(n)]
        else:
            centers[j] = data[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((data - centers[j]) ** 2).sum(axis=1))

    labels = np.zeros(n, dtype=np.int64)
    history = []
    for _ in range(iters):
        dists = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = dists.argmin(axis=1)
        point_d2 = dists[np.arange(n), labels]
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = data[members].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centers[j] = data[far]
                labels[far] = j
                point_d2[far] = 0.0
        sse = float(((data - centers[labels]) ** 2).sum())
        if history and abs(history[-1] - sse) < 1e-12:
            history.append(sse)
            break
        history.append(sse)
    return labels, centers, history


def kmeans_baseline(data, k: int, seed: int = 0, iters: int = 100):
    """Cluster labels from one seeded K-means run."""
    labels, _, _ = kmeans_fit(data, k, seed, iters)
    return labels
