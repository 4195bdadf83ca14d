import numpy as np
import pytest
from scipy import ndimage

from glyphcast.classify.nets import (
    Adam,
    Cnn,
    Mlp,
    conv_forward,
    gradient_check,
    pool_backward,
    pool_forward,
    softmax_cross_entropy,
)
from glyphcast.core import ModelError


@pytest.mark.parametrize("kind", ["mlp", "cnn"])
def test_backprop_matches_central_differences(kind):
    result = gradient_check(kind, tile_size=10, classes=95, probes=128)
    assert result.checked >= 100
    assert result.max_rel_error < 1e-4


def test_conv_forward_is_zero_padded_correlation():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 1, 6, 7))
    w = rng.normal(size=(1, 1, 3, 3))
    out, _ = conv_forward(x, w, np.array([0.25]))
    expected = ndimage.correlate(x[0, 0], w[0, 0], mode="constant", cval=0.0) + 0.25
    np.testing.assert_allclose(out[0, 0], expected, atol=1e-12)


def test_max_pool_routes_gradient_to_winner():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    out, arg = pool_forward(x)
    assert out[0, 0].tolist() == [[5.0, 7.0], [13.0, 15.0]]
    dx = pool_backward(np.ones_like(out), arg, x.shape)
    assert dx.sum() == 4.0 and dx[0, 0, 1, 1] == 1.0 and dx[0, 0, 0, 0] == 0.0


def test_pool_drops_trailing_odd_row():
    out, _ = pool_forward(np.ones((2, 3, 5, 5)))
    assert out.shape == (2, 3, 2, 2)


def test_softmax_cross_entropy_uniform_logits():
    loss, grad = softmax_cross_entropy(np.zeros((4, 10)), np.array([0, 1, 2, 3]))
    assert loss == pytest.approx(np.log(10.0))
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)


def test_network_shapes():
    rng = np.random.default_rng(1)
    mlp = Mlp(36, 95, hidden=(20,))
    logits, _ = mlp.forward(mlp.init(rng), rng.uniform(size=(3, 36)))
    assert logits.shape == (3, 95)
    cnn = Cnn(10, 95, channels=(4, 8), dense=16)
    params = cnn.init(rng)
    assert params["dense_w"].shape == (8 * 5 * 5, 16)
    logits, _ = cnn.forward(params, rng.uniform(size=(2, 100)))
    assert logits.shape == (2, 95)
    with pytest.raises(ModelError):
        Cnn(1, 95)


def test_adam_descends_a_quadratic():
    params = {"w": np.array([3.0, -2.0])}
    opt = Adam(params, lr=0.1)
    for _ in range(300):
        opt.step(params, {"w": 2.0 * params["w"]})
    assert np.abs(params["w"]).max() < 0.5
