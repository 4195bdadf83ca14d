import numpy as np
import pytest

from glyphcast.core import Charset, DataError, FeatureMode, FormatError, Tile
from glyphcast.features import raw
from glyphcast.font import GLYPH_HEIGHT, GLYPH_WIDTH, builtin_font, glyph_bitmap, parse_font
from glyphcast.glyphset import (
    AugmentParams,
    augment,
    augment_values,
    class_counts,
    export_csv,
    glyph_stack,
    glyph_to_pixels,
    per_class_counts,
    quantize,
    read_dataset,
    render_glyph,
    split,
    summarize_counts,
    synthesize,
    write_dataset,
)


# ---------------------------------------------------------------- font


def test_builtin_font_covers_printable_ascii():
    font = builtin_font()
    assert sorted(font) == list(range(32, 127))
    assert all(b.shape == (GLYPH_HEIGHT, GLYPH_WIDTH) for b in font.values())
    assert glyph_bitmap(32).sum() == 0
    assert all(font[c].sum() > 0 for c in range(33, 127))


def test_builtin_glyphs_are_distinct():
    flat = np.stack([b.ravel() for b in builtin_font().values()])
    assert np.unique(flat, axis=0).shape[0] == 95


def test_glyph_bitmap_unknown_code():
    with pytest.raises(DataError, match="unknown character"):
        glyph_bitmap(9)


@pytest.mark.parametrize(
    "source, message",
    [
        ("@ 65 A\n0 ####", "expected 8 pixels"),
        ("@ 65 A\n16 ########", "outside the cell"),
        ("@ 65 A\n0-3 ########\n2 ########", "redefines a row"),
        ("@ 65 A\n@ 65 A", "duplicate glyph"),
        ("0 ########", "cannot parse"),
    ],
)
def test_parse_font_errors(source, message):
    with pytest.raises(DataError, match=message):
        parse_font(source)


def test_parse_font_row_ranges():
    glyphs = parse_font("@ 66 B\n2-4 ##......\n")
    bitmap = glyphs[66]
    assert bitmap[2:5, :2].all() and bitmap.sum() == 6


# ---------------------------------------------------------------- rendering


def test_render_glyph_tiles():
    space = render_glyph(32)
    assert isinstance(space, Tile) and space.n == 10
    assert space.values.sum() == 0
    dash = render_glyph(ord("-")).values
    assert dash[:3].sum() == 0 and dash[-3:].sum() == 0 and dash[4:6].sum() > 0
    bar = render_glyph(ord("|")).values
    assert bar[:, :3].sum() == 0 and bar[:, -3:].sum() == 0


def test_rendered_tiles_are_distinct_per_class():
    stack = glyph_stack(Charset.default(), 10)
    assert stack.shape == (95, 10, 10)
    assert np.unique(stack.reshape(95, -1), axis=0).shape[0] == 95
    assert stack.min() >= 0.0 and stack.max() <= 1.0


def test_render_glyph_rejects_outside_charset():
    small = Charset((32, 65))
    with pytest.raises(DataError, match="unknown character"):
        render_glyph(66, charset=small)
    with pytest.raises(DataError):
        render_glyph(65, n=1)


def test_glyph_to_pixels_polarity():
    assert glyph_to_pixels(np.array([0.0, 1.0, 0.5])).tolist() == [255, 0, 128]


# ---------------------------------------------------------------- augmentation


def test_identity_augmentation_keeps_tile():
    t = render_glyph(ord("A"))
    out = augment(t, np.random.default_rng(1), AugmentParams.identity())
    assert out.equals(t)


def test_augmentation_is_reproducible_and_bounded():
    t = render_glyph(ord("#"))
    a = augment(t, np.random.default_rng([4, 2]), AugmentParams())
    b = augment(t, np.random.default_rng([4, 2]), AugmentParams())
    assert a.equals(b)
    assert a.values.min() >= 0.0 and a.values.max() <= 1.0


def test_shift_only_augmentation_moves_ink():
    t = render_glyph(ord("|"))
    params = AugmentParams(max_shift=2, max_sigma=0.0, max_noise=0.0)
    outs = [augment(t, np.random.default_rng(s), params) for s in range(20)]
    assert any(not o.equals(t) for o in outs)
    assert all(o.values.sum() <= t.values.sum() + 1e-12 for o in outs)


def test_augment_params_are_non_negative():
    with pytest.raises(DataError):
        AugmentParams(max_shift=-1)
    with pytest.raises(DataError, match="supersample"):
        AugmentParams(supersample=0)


def test_augment_params_from_dict():
    assert AugmentParams.from_dict({}) == AugmentParams()
    p = AugmentParams.from_dict({"max_shift": "2", "supersample": 1})
    assert p.max_shift == 2 and p.supersample == 1
    with pytest.raises(DataError) as info:
        AugmentParams.from_dict({"max_sigma": "wide"})
    assert info.value.error_type == "config"


def test_quantize_matches_pipeline_threshold():
    # 0.49 renders as pixel 130, 0.51 as 125
    assert quantize(np.array([0.0, 0.49, 0.51, 1.0])).tolist() == [0.0, 0.0, 1.0, 1.0]
    assert quantize(np.array([0.51]), threshold=100).tolist() == [0.0]


def _shifted(v, dy, dx):
    h, w = v.shape
    out = np.zeros_like(v)
    out[max(dy, 0):h + min(dy, 0), max(dx, 0):w + min(dx, 0)] = (
        v[max(-dy, 0):h - max(dy, 0), max(-dx, 0):w - max(dx, 0)]
    )
    return out


def test_unit_supersample_shifts_by_whole_pixels():
    v = render_glyph(ord("#")).values
    params = AugmentParams(max_shift=1, max_sigma=0.0, max_noise=0.0, supersample=1)
    candidates = [_shifted(v, dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    for s in range(12):
        out = augment_values(v, np.random.default_rng(s), params)
        assert any(np.allclose(out, c, atol=1e-12) for c in candidates)


def test_default_shift_stays_below_one_tile_pixel():
    v = render_glyph(ord("|")).values
    params = AugmentParams(max_sigma=0.0, max_noise=0.0)
    for s in range(20):
        out = augment_values(v, np.random.default_rng(s), params)
        # a sub-pixel linear shift keeps every stroke pixel partly inked
        assert np.all(out[v > 0.5] > 0.0)


def test_quantized_augmentation_is_a_mask_before_noise():
    v = render_glyph(ord("A")).values
    params = AugmentParams(max_noise=0.0)
    out = augment_values(v, np.random.default_rng(3), params, threshold=128)
    assert set(np.unique(out).tolist()) <= {0.0, 1.0}


# ---------------------------------------------------------------- synthesis


def test_per_class_counts_gives_remainder_to_low_classes():
    counts = per_class_counts(100, 95)
    assert counts.sum() == 100
    assert counts[:5].tolist() == [2] * 5 and counts[5] == 1


def test_synthesize_layout(raw_set, charset):
    assert len(raw_set) == 4 * charset.size
    assert raw_set.dim == 100 and raw_set.feature_mode is FeatureMode.RAW
    assert np.all(np.diff(raw_set.labels) >= 0)
    assert class_counts(raw_set).tolist() == [4] * charset.size
    # first sample of each class is the clean glyph, as a stroke mask
    a = charset.index_of(ord("A"))
    first = np.flatnonzero(raw_set.labels == a)[0]
    clean = Tile(quantize(render_glyph(ord("A")).values))
    np.testing.assert_array_equal(raw_set.features[first], raw(clean).astype(np.float32))


def test_synthesize_without_threshold_keeps_grey_values(charset):
    ds = synthesize(charset, 10, charset.size, threshold=None, params=AugmentParams.identity())
    a = charset.index_of(ord("A"))
    np.testing.assert_allclose(ds.features[a], raw(render_glyph(ord("A"))).astype(np.float32))
    masked = synthesize(charset, 10, charset.size, params=AugmentParams.identity())
    assert set(np.unique(masked.features).tolist()) == {0.0, 1.0}


def test_synthesize_is_deterministic_and_thread_independent(charset):
    a = synthesize(charset, 10, 200, seed=11)
    b = synthesize(charset, 10, 200, seed=11, threads=4)
    c = synthesize(charset, 10, 200, seed=12)
    assert a.equals(b)
    assert not a.equals(c)


def test_synthesize_too_few_samples(charset):
    with pytest.raises(DataError, match="too few samples"):
        synthesize(charset, 10, 10)


def test_synthesize_emits_stage_event(charset):
    events = []
    synthesize(charset, 10, 95, emit=lambda **kw: events.append(kw))
    assert events[0]["event_type"] == "stage"
    assert events[0]["data"]["stage"] == "synthesize"


# ---------------------------------------------------------------- split


def test_split_is_stratified_and_disjoint(raw_set, raw_split):
    train, test = raw_split
    assert len(train) + len(test) == len(raw_set)
    assert len(test) == 95
    assert class_counts(test).tolist() == [1] * 95
    again_train, again_test = split(raw_set, 0.25, seed=3)
    assert again_test.equals(test) and again_train.equals(train)


def test_split_leftover_goes_to_smallest_classes(charset):
    ds = synthesize(charset, 10, charset.size, seed=0)
    _, test = split(ds, 0.2, seed=0)
    assert test.labels.tolist() == list(range(19))


def test_split_rejects_empty_sides(charset):
    ds = synthesize(charset, 10, charset.size, seed=0)
    with pytest.raises(DataError):
        split(ds, 0.001)
    with pytest.raises(DataError):
        split(ds, 1.0)


# ---------------------------------------------------------------- files


def test_gcds_round_trip_and_bytes_are_stable(tmp_path, hog_set):
    p1 = write_dataset(hog_set, tmp_path / "a.gcds")
    p2 = write_dataset(hog_set, tmp_path / "b.gcds")
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes()[:4] == b"GCDS"
    back = read_dataset(p1)
    assert back.equals(hog_set)
    assert back.seed is None


def test_gcds_rejects_corruption(tmp_path, raw_set):
    path = write_dataset(raw_set, tmp_path / "d.gcds")
    blob = path.read_bytes()
    (tmp_path / "short.gcds").write_bytes(blob[:-3])
    with pytest.raises(FormatError):
        read_dataset(tmp_path / "short.gcds")
    (tmp_path / "magic.gcds").write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError, match="not a GCDS"):
        read_dataset(tmp_path / "magic.gcds")
    (tmp_path / "tiny.gcds").write_bytes(blob[:6])
    with pytest.raises(FormatError):
        read_dataset(tmp_path / "tiny.gcds")


def test_export_csv_and_counts(tmp_path, logpolar_set):
    path = export_csv(logpolar_set, tmp_path / "lp.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["label", "f0", "f1"]
    assert len(lines[0].split(",")) == 61
    assert len(lines) == len(logpolar_set) + 1
    counts = summarize_counts(logpolar_set)
    assert counts[" "] == 2 and counts["~"] == 2
