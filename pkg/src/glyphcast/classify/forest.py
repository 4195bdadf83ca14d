"""Random forest of Gini decision trees on bootstrap samples.

Trees are stored flat: node arrays for all trees concatenated, with
``tree_offsets[t]`` the index of tree ``t``'s root. Child indices are
local to their tree. Leaves have ``feature == -1`` and carry a class in
``value``. A sample goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from glyphcast.classify.backend import TrainContext

Tree = Dict[str, np.ndarray]


def _best_split(
    xs: np.ndarray, ys: np.ndarray, classes: int, min_leaf: int
) -> Tuple[float, int]:
    """Best (score, position) for one sorted feature; higher score = purer children.

    The score is sum(left_counts**2)/n_left + sum(right_counts**2)/n_right,
    which is maximal exactly where the weighted Gini impurity is minimal.
    """

    m = xs.size
    onehot = np.zeros((m, classes))
    onehot[np.arange(m), ys] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    score = (
        np.einsum("ij,ij->i", left, left) / n_left
        + np.einsum("ij,ij->i", right, right) / n_right
    )
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return -np.inf, -1
    score[~valid] = -np.inf
    pos = int(np.argmax(score))
    return float(score[pos]), pos


def _threshold(lo: float, hi: float) -> np.float32:
    # the midpoint must stay strictly below ``hi`` after rounding to float32
    mid = np.float32((lo + hi) / 2.0)
    if not mid < np.float32(hi):
        mid = np.float32(lo)
    return mid


def grow_tree(
    features: np.ndarray,
    labels: np.ndarray,
    classes: int,
    rng: np.random.Generator,
    max_features: int,
    min_leaf: int = 1,
    max_depth: Optional[int] = None,
    bootstrap: bool = True,
) -> Tree:
    count, dim = features.shape
    root_idx = rng.integers(0, count, size=count) if bootstrap else np.arange(count)

    feature: List[int] = [-1]
    threshold: List[float] = [0.0]
    left: List[int] = [-1]
    right: List[int] = [-1]
    value: List[int] = [0]

    stack: List[Tuple[int, np.ndarray, int]] = [(0, root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        node_labels = labels[idx]
        counts = np.bincount(node_labels, minlength=classes)
        value[node] = int(np.argmax(counts))
        pure = np.count_nonzero(counts) <= 1
        if pure or idx.size < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue

        present, compact = np.unique(node_labels, return_inverse=True)
        block = features[idx]
        best = (-np.inf, -1, -1)
        order_cache: Optional[np.ndarray] = None
        visited = 0
        for f in rng.permutation(dim):
            if visited >= max_features and best[1] >= 0:
                break
            visited += 1
            col = block[:, f]
            order = np.argsort(col, kind="stable")
            xs = col[order]
            if xs[0] == xs[-1]:
                continue
            score, pos = _best_split(xs, compact[order], present.size, min_leaf)
            if score > best[0]:
                best = (score, int(f), pos)
                order_cache = order
        if best[1] < 0 or order_cache is None:
            continue

        f, pos = best[1], best[2]
        xs = block[order_cache, f]
        thr = _threshold(float(xs[pos]), float(xs[pos + 1]))
        go_left = block[:, f] <= thr
        l_id, r_id = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0)
        feature[node] = f
        threshold[node] = float(thr)
        left[node] = l_id
        right[node] = r_id
        stack.append((r_id, idx[~go_left], depth + 1))
        stack.append((l_id, idx[go_left], depth + 1))

    return {
        "feature": np.asarray(feature, dtype=np.int32),
        "threshold": np.asarray(threshold, dtype=np.float32),
        "left": np.asarray(left, dtype=np.int32),
        "right": np.asarray(right, dtype=np.int32),
        "value": np.asarray(value, dtype=np.int32),
    }


def fit(
    features: np.ndarray, labels: np.ndarray, hyperparams: Mapping[str, Any], ctx: TrainContext
) -> Dict[str, np.ndarray]:
    trees = int(hyperparams["trees"])
    min_leaf = int(hyperparams.get("min_leaf", 1))
    max_depth = hyperparams.get("max_depth")
    max_depth = None if max_depth in (None, 0) else int(max_depth)
    max_features = max(1, int(np.sqrt(features.shape[1])))

    def _one(t: int) -> Tree:
        # each tree owns its stream, so parallel and serial runs agree
        rng = np.random.default_rng([ctx.seed, t])
        return grow_tree(features, labels, ctx.classes, rng, max_features, min_leaf, max_depth)

    workers = max(1, int(ctx.threads or 1))
    if workers == 1:
        grown = [_one(t) for t in range(trees)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            grown = list(pool.map(_one, range(trees)))

    sizes = [tree["feature"].size for tree in grown]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    ctx.emit(
        event_type="metric",
        phase="train:rf",
        data={"name": "forest_nodes", "value": int(offsets[-1]), "trees": trees},
    )
    params = {key: np.concatenate([tree[key] for tree in grown]) for key in grown[0]}
    params["tree_offsets"] = offsets
    return params


def tree_votes(params: Mapping[str, np.ndarray], features: np.ndarray, classes: int) -> np.ndarray:
    """(Q, classes) vote counts; order of tree evaluation does not matter."""

    feature = params["feature"].astype(np.int64)
    threshold = params["threshold"].astype(np.float64)
    left = params["left"].astype(np.int64)
    right = params["right"].astype(np.int64)
    value = params["value"].astype(np.int64)
    offsets = params["tree_offsets"]

    q = features.shape[0]
    rows = np.arange(q)
    votes = np.zeros((q, classes), dtype=np.int64)
    for t in range(offsets.size - 1):
        base = int(offsets[t])
        node = np.zeros(q, dtype=np.int64)
        while True:
            f = feature[base + node]
            active = np.flatnonzero(f >= 0)
            if active.size == 0:
                break
            at = base + node[active]
            go_left = features[active, f[active]] <= threshold[at]
            node[active] = np.where(go_left, left[at], right[at])
        np.add.at(votes, (rows, value[base + node]), 1)
    return votes


def predict(
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    return np.argmax(tree_votes(params, features, classes), axis=1).astype(np.int64)
