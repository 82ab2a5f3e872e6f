"""Classification evaluation: repeated class-balanced random splits, a
cosine k-NN classifier, accuracy and top-k error.

The classifier is deliberately simple and fully checkable: cosine k-NN with
majority vote, ties broken by summed similarity and then by lowest class
id.  Reports label the classifier so its numbers are never mistaken for a
trained model's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .reports import ClassificationReport


@dataclass(frozen=True)
class LabeledSet:
    """n descriptors with integer class labels in [0, class_count)."""

    descriptors: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        desc = np.ascontiguousarray(self.descriptors, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if desc.ndim != 2:
            raise InvalidInputError(f"descriptors must be n x dim, got shape {desc.shape}")
        if labels.shape != (desc.shape[0],):
            raise InvalidInputError(f"{desc.shape[0]} descriptors but labels shaped {labels.shape}")
        if self.class_count < 1:
            raise InvalidInputError("class_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise InvalidInputError(f"labels must lie in [0, {self.class_count})")
        if desc.shape[0] < self.class_count:
            raise InvalidInputError("need at least one item per class")
        desc.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "descriptors", desc)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.descriptors.shape[0]

    def subset(self, indices: np.ndarray) -> "LabeledSet":
        return LabeledSet(self.descriptors[indices], self.labels[indices], self.class_count)


@dataclass(frozen=True)
class SplitSpec:
    """How to split: items per class in train, repeat count, base seed."""

    train_per_class: int
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.train_per_class < 1:
            raise InvalidInputError("train_per_class must be positive")
        if self.repeats < 1:
            raise InvalidInputError("repeats must be positive")


def random_split(data: LabeledSet, spec: SplitSpec, repeat_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint class-balanced (train_indices, test_indices), deterministic
    per (seed, repeat_index)."""
    rng = np.random.default_rng([spec.seed, repeat_index])
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for cls in range(data.class_count):
        members = np.flatnonzero(data.labels == cls)
        if members.size <= spec.train_per_class:
            raise InvalidInputError(
                f"class {cls} has {members.size} items; needs more than train_per_class={spec.train_per_class}"
            )
        perm = rng.permutation(members)
        train.append(perm[: spec.train_per_class])
        test.append(perm[spec.train_per_class :])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _cosine(queries: np.ndarray, train: np.ndarray) -> np.ndarray:
    qn = np.linalg.norm(queries, axis=1, keepdims=True)
    tn = np.linalg.norm(train, axis=1, keepdims=True)
    q = queries / np.where(qn == 0.0, 1.0, qn)
    t = train / np.where(tn == 0.0, 1.0, tn)
    return q @ t.T


def knn_predict(train: LabeledSet, queries: np.ndarray, k: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Cosine k-NN majority vote.

    Returns (predicted labels, per-class score matrix).  Scores are the
    summed similarity of in-class neighbors among the k nearest (0 for
    classes with no neighbor).  Vote ties break by summed similarity, then
    by lowest class id.  Neighbor ties at the k boundary break by ascending
    train index.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if train.size == 0:
        raise InvalidInputError("empty train set")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != train.descriptors.shape[1]:
        raise InvalidInputError(
            f"query dim {queries.shape[1]} != train dim {train.descriptors.shape[1]}"
        )
    sims = _cosine(queries, train.descriptors)
    k_eff = min(k, train.size)
    train_idx = np.arange(train.size)

    n = queries.shape[0]
    scores = np.zeros((n, train.class_count))
    votes = np.zeros((n, train.class_count), dtype=np.int64)
    for row in range(n):
        order = np.lexsort((train_idx, -sims[row]))[:k_eff]
        np.add.at(votes[row], train.labels[order], 1)
        np.add.at(scores[row], train.labels[order], sims[row][order])
    # Majority vote; ties by summed similarity, then lowest class id.  The
    # lexsort key order below is (class asc, score desc, votes desc).
    predicted = np.empty(n, dtype=np.int64)
    classes = np.arange(train.class_count)
    for row in range(n):
        best = np.lexsort((classes, -scores[row], -votes[row]))[0]
        predicted[row] = best
    return predicted, scores


def predict_from_scores(scores: np.ndarray) -> np.ndarray:
    """Argmax over the per-class score matrix; ties take the lowest class."""
    return np.argmax(scores, axis=1)


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of matching labels."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise InvalidInputError("nothing to score")
    return float(np.mean(predicted == truth))


def topk_error(scores: np.ndarray, truth: np.ndarray, k: int) -> float:
    """Fraction of rows whose true class misses the k highest-scoring
    classes.  Score ties resolve toward the lower class id (stable sort), so
    the top-k set grows monotonically with k."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != truth.shape[0]:
        raise InvalidInputError(f"scores {scores.shape} do not match truth {truth.shape}")
    class_count = scores.shape[1]
    if not 1 <= k <= class_count:
        raise InvalidInputError(f"k must lie in [1, {class_count}], got {k}")
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    contained = (order == truth[:, None]).any(axis=1)
    return float(1.0 - np.mean(contained))


def run_protocol(data: LabeledSet, spec: SplitSpec, k: int = 5,
                 label: str = "", fingerprint: str = "",
                 topk: tuple[int, ...] = ()) -> ClassificationReport:
    """Repeat the random train/test partitioning and report mean and
    standard deviation of k-NN accuracy, retaining per-repeat values.

    topk asks for additional top-k error rates (computed on every repeat's
    score matrix and averaged).
    """
    accuracies = []
    topk_sums = {kk: 0.0 for kk in topk}
    for repeat in range(spec.repeats):
        train_idx, test_idx = random_split(data, spec, repeat)
        train = data.subset(train_idx)
        test = data.subset(test_idx)
        predicted, scores = knn_predict(train, test.descriptors, k=k)
        accuracies.append(accuracy(predicted, test.labels))
        for kk in topk:
            topk_sums[kk] += topk_error(scores, test.labels, kk)
    return ClassificationReport(
        label=label or f"knn-protocol-x{spec.repeats}",
        fingerprint=fingerprint,
        classifier=f"cosine-knn-k{k}",
        per_repeat_accuracy=tuple(accuracies),
        topk_errors={kk: total / spec.repeats for kk, total in topk_sums.items()},
    )
