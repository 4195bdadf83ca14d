import numpy as np
import pytest

from glyphcast.core import DataError, FeatureMode, Tile
from glyphcast.features import (
    HogConfig,
    extract,
    extract_batch,
    feature_dim,
    hog,
    log_polar_batch,
    log_polar_histogram,
    raw,
)
from glyphcast.glyphset import glyph_stack, render_glyph


def _vertical_stroke(n=10, col=4):
    values = np.zeros((n, n))
    values[:, col] = 1.0
    return values


def test_raw_is_row_major_copy():
    t = Tile(np.arange(16, dtype=np.float64).reshape(4, 4) / 15.0)
    v = raw(t)
    assert v.shape == (16,)
    assert v[5] == t.values[1, 1]
    v[0] = 0.5
    assert t.values[0, 0] == 0.0


def test_hog_config_dimensions():
    assert HogConfig.default_for(10) == HogConfig(cell_size=5, block=1, bins=9)
    assert HogConfig.default_for(10).dim(10) == 36
    assert HogConfig.default_for(9).dim(9) == 9
    assert HogConfig(cell_size=2, block=2, bins=9).dim(10) == 4 * 4 * 4 * 9
    with pytest.raises(DataError, match="does not divide") as err:
        HogConfig(cell_size=3).dim(10)
    assert err.value.error_type == "cell_size"


def test_hog_of_blank_tile_is_zero():
    assert not hog(Tile.blank(10)).any()


def test_hog_vertical_stroke_votes_horizontal_gradient():
    h = hog(_vertical_stroke()).reshape(2, 2, 9)
    # gradients are purely horizontal, i.e. orientation bin 0
    assert h[..., 1:].max() == pytest.approx(0.0, abs=1e-12)
    assert np.all(h[..., 0] > 0.99)


def test_hog_blocks_are_l2_hys_normalized(charset):
    stack = glyph_stack(charset, 10)
    feats = extract_batch(stack[1:], FeatureMode.HOG).reshape(-1, 4, 9)
    norms = np.linalg.norm(feats, axis=2)
    assert np.all(norms <= 1.0 + 1e-9)
    assert np.all(feats >= 0.0)


def test_hog_matches_skimage_dominant_orientations():
    skfeature = pytest.importorskip("skimage.feature")
    # hard binning in skimage versus linear votes here; compare axis-aligned strokes only
    for values in (_vertical_stroke(), _vertical_stroke(col=7)):
        ours = hog(values).reshape(2, 2, 9)
        ref = skfeature.hog(
            values,
            orientations=9,
            pixels_per_cell=(5, 5),
            cells_per_block=(1, 1),
            block_norm="L2-Hys",
            feature_vector=True,
        ).reshape(2, 2, 9)
        inked = ref.sum(axis=2) > 0
        np.testing.assert_array_equal(ours.sum(axis=2) > 0, inked)
        np.testing.assert_array_equal(ours.argmax(axis=2)[inked], ref.argmax(axis=2)[inked])


def test_log_polar_normalization_and_blank():
    h = log_polar_histogram(render_glyph(ord("O")))
    assert h.shape == (60,)
    assert h.sum() == pytest.approx(1.0)
    assert not log_polar_histogram(Tile.blank(10)).any()


def test_log_polar_angles_follow_image_orientation():
    values = np.zeros((10, 10))
    values[4:6, :] = 1.0  # horizontal bar through the centre
    h = log_polar_histogram(values).reshape(5, 12)
    per_sector = h.sum(axis=0)
    assert per_sector[[2, 3, 8, 9]].sum() == 0.0
    assert per_sector[[0, 5, 6, 11]].sum() > 0.5


def test_log_polar_custom_bins():
    h = log_polar_histogram(render_glyph(ord("x")), radial_bins=3, angular_bins=8)
    assert h.shape == (24,)
    with pytest.raises(DataError):
        log_polar_histogram(render_glyph(ord("x")), radial_bins=0)


@pytest.mark.parametrize(
    "mode, dim", [(FeatureMode.RAW, 100), (FeatureMode.HOG, 36), (FeatureMode.LOGPOLAR, 60)]
)
def test_batch_and_single_extraction_agree(charset, mode, dim):
    stack = glyph_stack(charset, 10)[:7]
    batch = extract_batch(stack, mode)
    assert batch.shape == (7, dim) == (7, feature_dim(mode, 10))
    for i in range(7):
        np.testing.assert_array_equal(batch[i], extract(stack[i], mode))


def test_log_polar_does_not_depend_on_chunking(charset):
    rng = np.random.default_rng(2)
    stack = np.clip(glyph_stack(charset, 10) + rng.uniform(0.0, 0.1, size=(95, 10, 10)), 0, 1)
    whole = log_polar_batch(stack)
    parts = np.concatenate([log_polar_batch(stack[i : i + 13]) for i in range(0, 95, 13)])
    np.testing.assert_array_equal(whole, parts)


def test_extract_rejects_non_square():
    with pytest.raises(DataError):
        extract(np.zeros((3, 4)), FeatureMode.RAW)
