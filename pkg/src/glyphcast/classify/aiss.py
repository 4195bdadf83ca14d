"""Alignment-insensitive glyph matcher over log-polar histograms.

There is no training pass. References are the histograms of every clean
glyph in the training labels (every charset glyph when built without data)
plus the histograms of the same glyphs after the conversion pipeline's
8-bit render and threshold, so a glyph that went through ``grid_to_image``
and back is matched exactly as well.
"""

from __future__ import annotations

from typing import Any, Dict, Mapping

import numpy as np

from glyphcast.classify.backend import TrainContext
from glyphcast.core import Charset
from glyphcast.features import log_polar_batch
from glyphcast.glyphset import glyph_stack, quantize

CHUNK = 512


def reference_histograms(
    charset: Charset, n: int, radial_bins: int, angular_bins: int
) -> Dict[str, np.ndarray]:
    clean = glyph_stack(charset, n)
    binarized = quantize(clean)
    stack = np.concatenate([clean, binarized])
    classes = np.arange(charset.size, dtype=np.int32)
    return {
        "references": log_polar_batch(stack, radial_bins, angular_bins).astype(np.float32),
        "reference_labels": np.concatenate([classes, classes]),
    }


def fit(
    features: np.ndarray, labels: np.ndarray, hyperparams: Mapping[str, Any], ctx: TrainContext
) -> Dict[str, np.ndarray]:
    refs = reference_histograms(
        ctx.charset,
        ctx.tile_size,
        int(hyperparams["radial_bins"]),
        int(hyperparams["angular_bins"]),
    )
    if labels.size == 0:
        return refs
    # a dataset limits the references to the classes it contains
    keep = np.isin(refs["reference_labels"], labels)
    return {name: arr[keep] for name, arr in refs.items()}


def predict(
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    refs = params["references"].astype(np.float64)
    ref_labels = params["reference_labels"].astype(np.int64)
    out = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], CHUNK):
        q = features[start : start + CHUNK]
        # direct differences so an exact reference match is exactly zero
        dist = np.sum((q[:, None, :] - refs[None, :, :]) ** 2, axis=2)
        best = np.full((classes, q.shape[0]), np.inf)
        np.minimum.at(best, ref_labels, dist.T)
        out[start : start + q.shape[0]] = np.argmin(best, axis=0)
    return out
