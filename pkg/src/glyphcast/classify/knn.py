"""Exact k-nearest-neighbour classifier (Euclidean, majority vote)."""

from __future__ import annotations

from typing import Any, Dict, Mapping

import numpy as np

from glyphcast.classify.backend import TrainContext

CHUNK = 256


def fit(
    features: np.ndarray, labels: np.ndarray, hyperparams: Mapping[str, Any], ctx: TrainContext
) -> Dict[str, np.ndarray]:
    # lazy learner: the payload is the training set itself
    return {
        "features": features.astype(np.float32),
        "labels": labels.astype(np.int32),
    }


def predict(
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    train = params["features"].astype(np.float64)
    train_labels = params["labels"].astype(np.int64)
    k = min(int(hyperparams["k"]), train.shape[0])
    train_sq = np.einsum("ij,ij->i", train, train)

    out = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], CHUNK):
        q = features[start : start + CHUNK]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * (q @ train.T) + train_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        # stable sort: equal distances keep training order
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        votes = np.zeros((q.shape[0], classes), dtype=np.int64)
        rows = np.repeat(np.arange(q.shape[0]), k)
        np.add.at(votes, (rows, train_labels[nearest].ravel()), 1)
        out[start : start + q.shape[0]] = np.argmax(votes, axis=1)
    return out
