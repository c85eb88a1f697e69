"""Transfer-learning evaluation on the three-tile digit modalities.

A kNN classifier is trained on common-domain images of central-modality
points and tested on images of the non-central modalities, for six methods:

========  ===========================================================
alone01   raw modality-0 pixels for training, raw modality 1 for testing
alone02   same with modality 2
mca01     m=1 maps between modalities 0 and 1
mca02     m=1 maps between modalities 0 and 2
stacked   m=1 maps between modality 0 and modalities 1 and 2 stacked
sgm       m=2 star-graph maps, tested on the weighted centroid
========  ===========================================================

All MCA-type maps use identity prescribed covariances.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .linalg import DimensionError
from .sgm import SgmConfig, train

__all__ = [
    "METHODS",
    "KnnModel",
    "knn_train",
    "knn_predict",
    "knn_predict_batch",
    "centroid_testset",
    "ExperimentSpec",
    "ExperimentResult",
    "split_indices",
    "run_experiment",
    "sweep",
    "results_csv",
    "results_json",
]

METHODS = ("alone01", "alone02", "mca01", "mca02", "stacked", "sgm")
CSV_HEADER = ("method", "k", "n", "accuracy", "trace_ratio")


@dataclass(frozen=True)
class KnnModel:
    """Brute-force Euclidean kNN over the columns of ``points``."""

    points: np.ndarray
    labels: np.ndarray
    neighbors: int = 15

    @property
    def n_train(self) -> int:
        return self.points.shape[1]


def knn_train(points, labels, neighbors=15):
    """Store a ``(dim, n_train)`` training set with aligned labels."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if points.ndim != 2 or points.shape[1] != labels.shape[0]:
        raise DimensionError(f"points {points.shape} do not align with {labels.shape[0]} labels")
    if not np.all(np.isfinite(points)):
        raise ValueError("training points must be finite")
    if not 1 <= neighbors <= points.shape[1]:
        raise ValueError(f"neighbors must lie in [1, {points.shape[1]}], got {neighbors}")
    return KnnModel(points, labels.copy(), int(neighbors))


def knn_predict_batch(model, queries, batch=256):
    """Predict labels for the columns of ``queries``.

    Ties are resolved deterministically: equidistant neighbors are ordered by
    training index, and among labels with equal votes the smallest wins.
    """
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[0] != model.points.shape[0]:
        raise DimensionError(
            f"queries must have {model.points.shape[0]} rows, got shape {queries.shape}"
        )
    classes, codes = np.unique(model.labels, return_inverse=True)
    pts = model.points.T
    out = np.empty(queries.shape[1], dtype=model.labels.dtype)
    for start in range(0, queries.shape[1], batch):
        q = queries[:, start : start + batch].T
        d2 = ((q[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.neighbors]
        votes = np.zeros((q.shape[0], classes.shape[0]), dtype=np.int64)
        np.add.at(votes, (np.arange(q.shape[0])[:, None], codes[nearest]), 1)
        out[start : start + q.shape[0]] = classes[votes.argmax(axis=1)]
    return out


def knn_predict(model, query):
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != model.points.shape[0]:
        raise DimensionError(f"query has length {query.shape[0]}, expected {model.points.shape[0]}")
    return knn_predict_batch(model, query[:, None])[0]


def centroid_testset(model, test_data, test_index=None, train_index=None):
    """Weighted centroid ``sum_i w_i g_i(x_i)`` of non-central test points.

    Parameters
    ----------
    model : SgmModel
    test_data : list of m arrays, each ``(d_i, N)``
        Test points of modalities ``1..m``, aligned by column.
    test_index, train_index : array_like, optional
        Source indices of the test points and of all points used in
        training; they must be disjoint.
    """
    if test_index is not None and train_index is not None:
        overlap = np.intersect1d(test_index, train_index)
        if overlap.size:
            raise ValueError(f"{overlap.size} test indices also appear in the training set")
    if len(test_data) != model.m:
        raise ValueError(f"expected test data for {model.m} modalities, got {len(test_data)}")
    out = None
    for w, g, X in zip(model.config.weights, model.maps[1:], test_data):
        img = w * g(np.asarray(X, dtype=np.float64))
        out = img if out is None else out + img
    return out


@dataclass(frozen=True)
class ExperimentSpec:
    method: str
    n: int
    k: int
    n_knn_train: int
    n_knn_test: int
    weights: tuple = (0.2, 0.8)
    seed: int = 0
    neighbors: int = 15

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; valid methods: {', '.join(METHODS)}")
        if self.n_knn_test < 1:
            raise ValueError("empty test set (n_knn_test must be >= 1)")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.n > self.n_knn_train:
            raise ValueError(f"n={self.n} exceeds n_knn_train={self.n_knn_train}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class ExperimentResult:
    method: str
    k: int
    n: int
    seed: int
    accuracy: float
    trace_ratio: float | None = None
    seconds: float = field(default=0.0, compare=False)


def split_indices(count, spec):
    """Seeded shuffle of ``range(count)`` cut into kNN-train and test ranges.

    The matched training points are the first ``spec.n`` kNN-train indices.
    """
    need = spec.n_knn_train + spec.n_knn_test
    if count < need:
        raise ValueError(f"need {need} samples, only {count} available")
    perm = np.random.default_rng(spec.seed).permutation(count)
    return perm[: spec.n_knn_train], perm[spec.n_knn_train : need]


def _mca_config(k):
    return SgmConfig(k=k, weights=(1.0,))


def run_experiment(spec, tiles):
    """Train the maps for ``spec.method``, then score the kNN transfer task."""
    t0 = time.perf_counter()
    train_idx, test_idx = split_indices(tiles.count, spec)
    matched = train_idx[: spec.n]
    x0, x1, x2 = tiles.modalities
    T = None

    if spec.method in ("alone01", "alone02"):
        train_pts = x0[:, train_idx]
        test_pts = (x1 if spec.method == "alone01" else x2)[:, test_idx]
    elif spec.method in ("mca01", "mca02"):
        other = x1 if spec.method == "mca01" else x2
        model = train([x0[:, matched], other[:, matched]], None, _mca_config(spec.k))
        train_pts = model.maps[0](x0[:, train_idx])
        test_pts = centroid_testset(model, [other[:, test_idx]], test_idx, train_idx)
    elif spec.method == "stacked":
        stacked = np.vstack([x1, x2])
        model = train([x0[:, matched], stacked[:, matched]], None, _mca_config(spec.k))
        train_pts = model.maps[0](x0[:, train_idx])
        test_pts = centroid_testset(model, [stacked[:, test_idx]], test_idx, train_idx)
    else:
        cfg = SgmConfig(k=spec.k, weights=tuple(spec.weights))
        model = train([x0[:, matched], x1[:, matched], x2[:, matched]], None, cfg)
        train_pts = model.maps[0](x0[:, train_idx])
        test_pts = centroid_testset(model, [x1[:, test_idx], x2[:, test_idx]], test_idx, train_idx)
        T = model.trace_ratio

    knn = knn_train(train_pts, tiles.labels[train_idx], spec.neighbors)
    pred = knn_predict_batch(knn, test_pts)
    acc = float(np.mean(pred == tiles.labels[test_idx]))
    return ExperimentResult(spec.method, spec.k, spec.n, spec.seed, acc, T, time.perf_counter() - t0)


def sweep(base, ks, methods, tiles, workers=1):
    """Run every ``(method, k)`` cell; results ordered by method then ``k``."""
    for meth in methods:
        if meth not in METHODS:
            raise ValueError(f"unknown method {meth!r}; valid methods: {', '.join(METHODS)}")
    specs = [replace(base, method=meth, k=int(k)) for meth in methods for k in ks]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda s: run_experiment(s, tiles), specs))
    else:
        results = [run_experiment(s, tiles) for s in specs]
    return sorted(results, key=lambda r: (METHODS.index(r.method), r.k))


def _num(x):
    return "" if x is None else f"{x:.17g}"


def results_csv(results):
    """CSV text with header ``method,k,n,accuracy,trace_ratio``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow([r.method, r.k, r.n, _num(r.accuracy), _num(r.trace_ratio)])
    return buf.getvalue()


def results_json(results, config=None):
    rows = [asdict(r) for r in results]
    return json.dumps({"config": config or {}, "results": rows}, indent=2, sort_keys=True) + "\n"
