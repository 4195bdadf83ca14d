"""One-vs-rest linear SVM trained with Pegasos-style subgradient steps.

Training runs in primal form with a bias column appended to every sample.
Because each step only scales the weights and adds violating samples, the
final weights are a sum over the visited samples; the payload stores that
kernel form (support vectors plus dual coefficients), so prediction scores
are ``(x . sv + 1) @ coef.T``.
"""

from __future__ import annotations

from typing import Any, Dict, Mapping

import numpy as np

from glyphcast.classify.backend import TrainContext

CHUNK = 512


def fit(
    features: np.ndarray, labels: np.ndarray, hyperparams: Mapping[str, Any], ctx: TrainContext
) -> Dict[str, np.ndarray]:
    lam = float(hyperparams["lambda"])
    epochs = int(hyperparams["epochs"])
    classes = ctx.classes
    count = features.shape[0]

    xb = np.hstack([features, np.ones((count, 1))])
    targets = -np.ones((count, classes))
    targets[np.arange(count), labels] = 1.0

    weights = np.zeros((classes, xb.shape[1]))
    hits = np.zeros((classes, count), dtype=np.int64)
    t = 0
    for epoch in range(epochs):
        order = np.random.default_rng([ctx.seed, epoch]).permutation(count)
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            y = targets[i]
            violated = y * (weights @ xb[i]) < 1.0
            weights *= 1.0 - 1.0 / t
            if violated.any():
                weights[violated] += eta * y[violated, None] * xb[i][None, :]
                hits[violated, i] += 1
        ctx.emit(
            event_type="metric",
            phase="train:svm",
            data={"name": "hinge_violations", "value": int(hits.sum()), "epoch": epoch + 1},
        )

    support = np.flatnonzero(hits.any(axis=0))
    coef = hits[:, support] * targets[support].T / (lam * max(t, 1))
    return {
        "support_vectors": features[support].astype(np.float32),
        "dual_coef": coef.astype(np.float32),
        "seen": (np.bincount(labels, minlength=classes) > 0).astype(np.int32),
    }


def decision_function(params: Mapping[str, np.ndarray], features: np.ndarray) -> np.ndarray:
    sv = params["support_vectors"].astype(np.float64)
    coef = params["dual_coef"].astype(np.float64)
    scores = np.empty((features.shape[0], coef.shape[0]))
    for start in range(0, features.shape[0], CHUNK):
        q = features[start : start + CHUNK]
        scores[start : start + q.shape[0]] = (q @ sv.T + 1.0) @ coef.T
    return scores


def predict(
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    scores = decision_function(params, features)
    if "seen" in params:
        scores[:, ~params["seen"].astype(bool)] = -np.inf
    # argmax keeps the first maximum, i.e. the smallest class index on ties
    return np.argmax(scores, axis=1).astype(np.int64)
