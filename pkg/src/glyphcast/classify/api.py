"""Uniform train / predict interface over the six classifier backends."""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from glyphcast.classify import aiss, forest, knn, nets, svm
from glyphcast.classify.artifact import decode_payload, encode_payload
from glyphcast.classify.backend import TrainContext
from glyphcast.classify.specs import KIND_SPECS, default_hyperparams, validate_hyperparams
from glyphcast.core import (
    MODEL_FORMAT_VERSION,
    Charset,
    DataError,
    Dataset,
    EmitFn,
    FeatureMode,
    ModelArtifact,
    ModelError,
    ModelKind,
    noop_emit,
)
from glyphcast.features import DEFAULT_ANGULAR_BINS, DEFAULT_RADIAL_BINS, feature_dim

FitFn = Callable[[np.ndarray, np.ndarray, Mapping[str, Any], TrainContext], Dict[str, np.ndarray]]
PredictFn = Callable[[Mapping[str, np.ndarray], np.ndarray, Mapping[str, Any], int], np.ndarray]

_BACKENDS: Dict[ModelKind, tuple[FitFn, PredictFn]] = {
    ModelKind.KNN: (knn.fit, knn.predict),
    ModelKind.SVM: (svm.fit, svm.predict),
    ModelKind.RF: (forest.fit, forest.predict),
    ModelKind.MLP: (nets.fit_mlp, nets.predict_mlp),
    ModelKind.CNN: (nets.fit_cnn, nets.predict_cnn),
    ModelKind.AISS: (aiss.fit, aiss.predict),
}


def expected_dim(m: ModelArtifact) -> int:
    hp = m.hyperparams
    return feature_dim(
        m.feature_mode,
        m.tile_size,
        radial_bins=int(hp.get("radial_bins", DEFAULT_RADIAL_BINS)),
        angular_bins=int(hp.get("angular_bins", DEFAULT_ANGULAR_BINS)),
    )


def _hyperparams(m: ModelArtifact) -> Dict[str, Any]:
    cached = m._decoded.get("hyperparams")
    if cached is None:
        cached = validate_hyperparams(m.kind, m.hyperparams)
        m._decoded["hyperparams"] = cached
    return cached


def _params(m: ModelArtifact) -> Dict[str, np.ndarray]:
    cached = m._decoded.get("params")
    if cached is None:
        cached = decode_payload(m.payload)
        m._decoded["params"] = cached
    return cached


def _build(
    kind: ModelKind,
    charset: Charset,
    tile_size: int,
    mode: FeatureMode,
    hp: Dict[str, Any],
    params: Dict[str, np.ndarray],
    seed: int,
) -> ModelArtifact:
    return ModelArtifact(
        kind=kind,
        tile_size=tile_size,
        feature_mode=mode,
        charset=charset,
        hyperparams=hp,
        payload=encode_payload(params),
        seed=seed,
        format_version=MODEL_FORMAT_VERSION,
    )


def train(
    kind: Union[str, ModelKind],
    train_set: Dataset,
    hyperparams: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    *,
    threads: Optional[int] = None,
    emit: Optional[EmitFn] = None,
) -> ModelArtifact:
    """Train ``kind`` on ``train_set``; ``hyperparams=None`` means the defaults.

    The result depends only on (kind, dataset, hyperparams, seed).
    """

    emit = emit or noop_emit
    k = ModelKind.parse(kind)
    spec = KIND_SPECS[k]
    hp = validate_hyperparams(k, default_hyperparams(k) if hyperparams is None else hyperparams)
    if seed < 0:
        raise ModelError(f"seed must be non-negative, got {seed}")
    if len(train_set) == 0:
        raise DataError("training set is empty")
    mode = train_set.feature_mode
    if mode not in spec.feature_modes:
        allowed = ", ".join(sorted(m.value for m in spec.feature_modes))
        raise ModelError(
            f"{k.value} requires {allowed} features, dataset has {mode.value}",
            error_type="feature_mode",
        )
    if k is ModelKind.AISS and train_set.dim != int(hp["radial_bins"]) * int(hp["angular_bins"]):
        raise ModelError(
            f"dimension mismatch: dataset has {train_set.dim} features, "
            f"aiss expects {hp['radial_bins']}x{hp['angular_bins']}"
        )

    ctx = TrainContext(
        charset=train_set.charset,
        tile_size=train_set.tile_size,
        feature_mode=mode,
        seed=seed,
        threads=threads,
        emit=emit,
    )
    phase = f"train:{k.value}"
    emit(
        event_type="stage",
        phase=phase,
        data={"stage": "train", "kind": k.value, "samples": len(train_set)},
    )
    started = time.perf_counter()
    fit_fn, _ = _BACKENDS[k]
    params = fit_fn(train_set.features.astype(np.float64), train_set.labels, hp, ctx)
    elapsed = time.perf_counter() - started

    model = _build(k, train_set.charset, train_set.tile_size, mode, hp, params, seed)
    predicted = predict_batch(model, train_set.features)
    accuracy = float(np.mean(predicted == train_set.labels))
    emit(event_type="metric", phase=phase, data={"name": "train_accuracy", "value": accuracy})
    emit(
        event_type="metric",
        phase=phase,
        data={"name": "train_seconds", "value": round(elapsed, 3)},
    )
    return replace(model, metadata={"train_accuracy": accuracy, "samples": len(train_set)})


def train_references(
    charset: Optional[Charset] = None,
    tile_size: int = 10,
    hyperparams: Optional[Mapping[str, Any]] = None,
) -> ModelArtifact:
    """Build an aiss model straight from the embedded font (no dataset)."""

    cs = charset or Charset.default()
    raw_hp = default_hyperparams(ModelKind.AISS) if hyperparams is None else hyperparams
    hp = validate_hyperparams(ModelKind.AISS, raw_hp)
    ctx = TrainContext(charset=cs, tile_size=tile_size, feature_mode=FeatureMode.LOGPOLAR)
    params = aiss.fit(np.empty((0, 0)), np.empty(0, dtype=np.int64), hp, ctx)
    model = _build(ModelKind.AISS, cs, tile_size, FeatureMode.LOGPOLAR, hp, params, 0)
    return replace(model, metadata={"samples": 0})


def predict_batch(
    m: ModelArtifact, features: Union[np.ndarray, Sequence[Sequence[float]]]
) -> np.ndarray:
    """Class indices for every row of ``features``; order is preserved."""

    arr = np.asarray(features, dtype=np.float32)
    if (arr.ndim == 1 and arr.size == 0) or (arr.ndim == 2 and arr.shape[0] == 0):
        return np.empty(0, dtype=np.int64)
    hp = _hyperparams(m)
    dim = expected_dim(m)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ModelError(
            f"dimension mismatch: model expects {dim} features, got shape {arr.shape}",
            error_type="dimension_mismatch",
        )
    _, predict_fn = _BACKENDS[m.kind]
    return predict_fn(_params(m), arr.astype(np.float64), hp, m.charset.size)


def predict(m: ModelArtifact, features: Union[np.ndarray, Sequence[float]]) -> int:
    arr = np.asarray(features, dtype=np.float32)
    if arr.ndim != 1:
        raise ModelError(f"dimension mismatch: expected one feature vector, got shape {arr.shape}")
    return int(predict_batch(m, arr[None, :])[0])
