"""Small MLP and CNN written directly in numpy, trained with Adam.

Layer stacks:

    mlp: d -> 256 (ReLU) -> 128 (ReLU) -> classes
    cnn: 1 x n x n -> conv3x3x16 (ReLU) -> maxpool 2x2
         -> conv3x3x32 (ReLU) -> dense 128 (ReLU) -> classes

Convolutions use "same" zero padding and are computed with im2col
(``sliding_window_view``). Training and gradient checks run in float64;
artifacts keep float32 copies of the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from glyphcast.classify.backend import TrainContext
from glyphcast.core import ModelError

Params = Dict[str, np.ndarray]
KERNEL = 3
PREDICT_CHUNK = 1024

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


# ============================================================
# Building blocks
# ============================================================


def he_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    rows = np.arange(logits.shape[0])
    loss = float(np.mean(np.log(total[:, 0]) - shifted[rows, labels]))
    grad = exp / total
    grad[rows, labels] -= 1.0
    return loss, grad / logits.shape[0]


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    batch, _, h, wd = x.shape
    cout = w.shape[0]
    pad = KERNEL // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * h * wd, -1)
    out = cols @ w.reshape(cout, -1).T + b
    return out.reshape(batch, h, wd, cout).transpose(0, 3, 1, 2), cols


def conv_backward(
    dout: np.ndarray, cols: np.ndarray, x_shape: Tuple[int, ...], w: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch, cin, h, wd = x_shape
    cout = w.shape[0]
    pad = KERNEL // 2
    dmat = dout.transpose(0, 2, 3, 1).reshape(-1, cout)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)
    dcols = (dmat @ w.reshape(cout, -1)).reshape(batch, h, wd, cin, KERNEL, KERNEL)
    dxp = np.zeros((batch, cin, h + 2 * pad, wd + 2 * pad))
    for ky in range(KERNEL):
        for kx in range(KERNEL):
            dxp[:, :, ky : ky + h, kx : kx + wd] += dcols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
    return dxp[:, :, pad : pad + h, pad : pad + wd], dw, db


def pool_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """2x2 max-pool, stride 2; a trailing odd row/column is dropped."""

    batch, ch, h, wd = x.shape
    h2, w2 = h // 2, wd // 2
    quads = (
        x[:, :, : 2 * h2, : 2 * w2]
        .reshape(batch, ch, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, ch, h2, w2, 4)
    )
    arg = quads.argmax(axis=-1)
    out = np.take_along_axis(quads, arg[..., None], axis=-1)[..., 0]
    return out, arg


def pool_backward(dout: np.ndarray, arg: np.ndarray, x_shape: Tuple[int, ...]) -> np.ndarray:
    batch, ch, h, wd = x_shape
    h2, w2 = h // 2, wd // 2
    dquads = np.zeros((batch, ch, h2, w2, 4))
    np.put_along_axis(dquads, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :, : 2 * h2, : 2 * w2] = (
        dquads.reshape(batch, ch, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, ch, 2 * h2, 2 * w2)
    )
    return dx


# ============================================================
# Networks
# ============================================================


@dataclass
class Cache:
    """Intermediate values kept for the backward pass."""

    values: Dict[str, Any] = field(default_factory=dict)
    # ReLU masks and pooling choices; a change marks a non-differentiable point
    pattern: List[np.ndarray] = field(default_factory=list)


class Mlp:
    def __init__(self, input_dim: int, classes: int, hidden: Sequence[int] = (256, 128)) -> None:
        self.sizes = [int(input_dim)] + [int(h) for h in hidden] + [int(classes)]

    def names(self) -> List[str]:
        out: List[str] = []
        for i in range(len(self.sizes) - 1):
            out += [f"dense{i}_w", f"dense{i}_b"]
        return out

    def init(self, rng: np.random.Generator) -> Params:
        params: Params = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            params[f"dense{i}_w"] = he_uniform(rng, (fan_in, fan_out), fan_in)
            params[f"dense{i}_b"] = np.zeros(fan_out)
        return params

    def forward(self, params: Params, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        cache = Cache()
        layers = len(self.sizes) - 1
        h = x
        for i in range(layers):
            cache.values[f"in{i}"] = h
            z = h @ params[f"dense{i}_w"] + params[f"dense{i}_b"]
            if i < layers - 1:
                mask = z > 0
                cache.pattern.append(mask)
                h = z * mask
            else:
                h = z
        return h, cache

    def backward(self, params: Params, cache: Cache, dlogits: np.ndarray) -> Params:
        grads: Params = {}
        layers = len(self.sizes) - 1
        d = dlogits
        for i in reversed(range(layers)):
            h = cache.values[f"in{i}"]
            grads[f"dense{i}_w"] = h.T @ d
            grads[f"dense{i}_b"] = d.sum(axis=0)
            if i > 0:
                d = (d @ params[f"dense{i}_w"].T) * cache.pattern[i - 1]
        return grads


class Cnn:
    def __init__(
        self,
        tile_size: int,
        classes: int,
        channels: Sequence[int] = (16, 32),
        dense: int = 128,
    ) -> None:
        if tile_size < 2:
            raise ModelError("cnn needs tiles of at least 2x2 pixels")
        self.n = int(tile_size)
        self.c1, self.c2 = (int(c) for c in channels)
        self.dense = int(dense)
        self.classes = int(classes)
        self.pooled = self.n // 2

    def names(self) -> List[str]:
        return ["conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b", "out_w", "out_b"]

    def init(self, rng: np.random.Generator) -> Params:
        flat = self.c2 * self.pooled * self.pooled
        return {
            "conv1_w": he_uniform(rng, (self.c1, 1, KERNEL, KERNEL), KERNEL * KERNEL),
            "conv1_b": np.zeros(self.c1),
            "conv2_w": he_uniform(
                rng, (self.c2, self.c1, KERNEL, KERNEL), self.c1 * KERNEL * KERNEL
            ),
            "conv2_b": np.zeros(self.c2),
            "dense_w": he_uniform(rng, (flat, self.dense), flat),
            "dense_b": np.zeros(self.dense),
            "out_w": he_uniform(rng, (self.dense, self.classes), self.dense),
            "out_b": np.zeros(self.classes),
        }

    def forward(self, params: Params, x: np.ndarray) -> Tuple[np.ndarray, Cache]:
        cache = Cache()
        img = x.reshape(x.shape[0], 1, self.n, self.n)
        z1, cols1 = conv_forward(img, params["conv1_w"], params["conv1_b"])
        m1 = z1 > 0
        a1 = z1 * m1
        p1, arg1 = pool_forward(a1)
        z2, cols2 = conv_forward(p1, params["conv2_w"], params["conv2_b"])
        m2 = z2 > 0
        a2 = z2 * m2
        flat = a2.reshape(a2.shape[0], -1)
        z3 = flat @ params["dense_w"] + params["dense_b"]
        m3 = z3 > 0
        a3 = z3 * m3
        logits = a3 @ params["out_w"] + params["out_b"]
        cache.values.update(
            img_shape=img.shape, cols1=cols1, a1_shape=a1.shape, arg1=arg1,
            p1_shape=p1.shape, cols2=cols2, a2_shape=a2.shape, flat=flat, a3=a3,
        )
        cache.pattern += [m1, arg1, m2, m3]
        return logits, cache

    def backward(self, params: Params, cache: Cache, dlogits: np.ndarray) -> Params:
        v = cache.values
        m1, _, m2, m3 = cache.pattern
        grads: Params = {}
        grads["out_w"] = v["a3"].T @ dlogits
        grads["out_b"] = dlogits.sum(axis=0)
        d3 = (dlogits @ params["out_w"].T) * m3
        grads["dense_w"] = v["flat"].T @ d3
        grads["dense_b"] = d3.sum(axis=0)
        d2 = (d3 @ params["dense_w"].T).reshape(v["a2_shape"]) * m2
        dp1, grads["conv2_w"], grads["conv2_b"] = conv_backward(
            d2, v["cols2"], v["p1_shape"], params["conv2_w"]
        )
        d1 = pool_backward(dp1, v["arg1"], v["a1_shape"]) * m1
        _, grads["conv1_w"], grads["conv1_b"] = conv_backward(
            d1, v["cols1"], v["img_shape"], params["conv1_w"]
        )
        return grads


Network = Any  # Mlp | Cnn


def build_network(
    kind: str, tile_size: int, input_dim: int, classes: int, hyperparams: Mapping[str, Any]
) -> Network:
    if kind == "mlp":
        return Mlp(input_dim, classes, hidden=hyperparams.get("hidden", (256, 128)))
    if kind == "cnn":
        if input_dim != tile_size * tile_size:
            raise ModelError("cnn requires raw pixel features")
        return Cnn(
            tile_size,
            classes,
            channels=hyperparams.get("channels", (16, 32)),
            dense=int(hyperparams.get("dense", 128)),
        )
    raise ModelError(f"no network for kind {kind!r}")


# ============================================================
# Training
# ============================================================


class Adam:
    def __init__(self, params: Params, lr: float) -> None:
        self.lr = float(lr)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def loss_and_grads(
    net: Network, params: Params, x: np.ndarray, y: np.ndarray
) -> Tuple[float, Params, Cache]:
    logits, cache = net.forward(params, x)
    loss, dlogits = softmax_cross_entropy(logits, y)
    return loss, net.backward(params, cache, dlogits), cache


def _fit(
    kind: str,
    features: np.ndarray,
    labels: np.ndarray,
    hyperparams: Mapping[str, Any],
    ctx: TrainContext,
) -> Dict[str, np.ndarray]:
    net = build_network(kind, ctx.tile_size, features.shape[1], ctx.classes, hyperparams)
    params = net.init(np.random.default_rng([ctx.seed, 0]))
    batch = int(hyperparams["batch"])
    epochs = int(hyperparams["epochs"])
    opt = Adam(params, float(hyperparams["lr"]))
    count = features.shape[0]
    for epoch in range(epochs):
        order = np.random.default_rng([ctx.seed, 1, epoch]).permutation(count)
        losses = []
        for start in range(0, count, batch):
            idx = order[start : start + batch]
            loss, grads, _ = loss_and_grads(net, params, features[idx], labels[idx])
            opt.step(params, grads)
            losses.append(loss * idx.size)
        ctx.emit(
            event_type="metric",
            phase=f"train:{kind}",
            data={"name": "epoch_loss", "value": float(sum(losses) / count), "epoch": epoch + 1},
        )
    out = {name: params[name].astype(np.float32) for name in net.names()}
    # classes without a training sample are never predicted
    seen = np.bincount(labels, minlength=ctx.classes) > 0
    out["seen"] = seen.astype(np.int32)
    # an all-zero input is the empty glyph, -1 when space was never trained
    space = ctx.charset.space_index
    out["blank"] = np.array([space if seen[space] else -1], dtype=np.int32)
    return out


def fit_mlp(
    features: np.ndarray, labels: np.ndarray, hyperparams: Mapping[str, Any], ctx: TrainContext
) -> Dict[str, np.ndarray]:
    return _fit("mlp", features, labels, hyperparams, ctx)


def fit_cnn(
    features: np.ndarray, labels: np.ndarray, hyperparams: Mapping[str, Any], ctx: TrainContext
) -> Dict[str, np.ndarray]:
    return _fit("cnn", features, labels, hyperparams, ctx)


def _predict(
    kind: str,
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    p = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    n = int(round(np.sqrt(features.shape[1])))
    net = build_network(kind, n, features.shape[1], classes, hyperparams)
    seen = params["seen"].astype(bool) if "seen" in params else np.ones(classes, dtype=bool)
    out = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], PREDICT_CHUNK):
        logits, _ = net.forward(p, features[start : start + PREDICT_CHUNK])
        logits[:, ~seen] = -np.inf
        out[start : start + logits.shape[0]] = np.argmax(logits, axis=1)
    blank = int(params["blank"][0]) if "blank" in params else -1
    if blank >= 0:
        out[~features.any(axis=1)] = blank
    return out


def predict_mlp(
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    return _predict("mlp", params, features, hyperparams, classes)


def predict_cnn(
    params: Mapping[str, np.ndarray],
    features: np.ndarray,
    hyperparams: Mapping[str, Any],
    classes: int,
) -> np.ndarray:
    return _predict("cnn", params, features, hyperparams, classes)


# ============================================================
# Gradient check
# ============================================================


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: int


def _same_pattern(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def gradient_check(
    kind: str,
    *,
    tile_size: int = 10,
    classes: int = 95,
    batch: int = 8,
    probes: int = 128,
    eps: float = 1e-5,
    seed: int = 0,
    hyperparams: Mapping[str, Any] | None = None,
) -> GradCheckResult:
    """Compare backprop gradients with central differences on one batch.

    Probes are spread round-robin over the parameter tensors. A probe whose
    +/-eps evaluations flip a ReLU or a pooling choice sits on a kink where
    the derivative is undefined; it is skipped and another is drawn.
    The relative error is ``|a - n| / max(|a| + |n|, 1e-5)``.
    """

    rng = np.random.default_rng([seed, 7])
    dim = tile_size * tile_size
    net = build_network(kind, tile_size, dim, classes, hyperparams or {})
    params = net.init(rng)
    for name in params:
        if name.endswith("_b"):
            params[name] = rng.uniform(-0.1, 0.1, size=params[name].shape)
    x = rng.uniform(0.0, 1.0, size=(batch, dim))
    y = rng.integers(0, classes, size=batch)

    _, grads, base = loss_and_grads(net, params, x, y)
    names = net.names()
    worst = 0.0
    checked = skipped = 0
    attempts = 0
    while checked < probes and attempts < probes * 20:
        name = names[attempts % len(names)]
        attempts += 1
        tensor = params[name]
        flat_index = int(rng.integers(0, tensor.size))
        pos = np.unravel_index(flat_index, tensor.shape)
        original = tensor[pos]

        tensor[pos] = original + eps
        plus_logits, plus_cache = net.forward(params, x)
        tensor[pos] = original - eps
        minus_logits, minus_cache = net.forward(params, x)
        tensor[pos] = original

        same = _same_pattern(base.pattern, plus_cache.pattern)
        if not (same and _same_pattern(base.pattern, minus_cache.pattern)):
            skipped += 1
            continue
        plus, _ = softmax_cross_entropy(plus_logits, y)
        minus, _ = softmax_cross_entropy(minus_logits, y)
        numeric = (plus - minus) / (2.0 * eps)
        analytic = float(grads[name][pos])
        rel = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-5)
        worst = max(worst, rel)
        checked += 1
    return GradCheckResult(max_rel_error=worst, checked=checked, skipped=skipped)
