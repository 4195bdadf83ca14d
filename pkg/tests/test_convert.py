import numpy as np
import pytest

from glyphcast.classify import train, train_references
from glyphcast.convert import (
    TONE_RAMP,
    ConvertOptions,
    convert_image,
    convert_with,
    crop_to,
    grid_to_image,
    grid_to_text,
    render_like,
    tone_convert,
)
from glyphcast.core import AsciiGrid, DataError, GrayImage
from glyphcast.fixtures import draw_fixture


@pytest.fixture(scope="module")
def aiss_model():
    return train_references()


@pytest.fixture(scope="module")
def knn_model(clean_raw_set):
    return train("knn", clean_raw_set, {"k": 1})


def test_blank_page_becomes_spaces(knn_model):
    grid = convert_image(GrayImage.blank(40, 30), knn_model)
    assert (grid.rows, grid.cols) == (2, 4)
    assert grid_to_text(grid) == "    \n    "


def test_scale_changes_grid_geometry(knn_model, line_image):
    full = convert_image(line_image, knn_model)
    half = convert_image(line_image, knn_model, 0.5)
    square = convert_image(line_image, knn_model, aspect=False)
    assert (full.rows, full.cols) == (2, 4)
    assert (half.rows, half.cols) == (1, 2)
    assert (square.rows, square.cols) == (3, 4)


@pytest.mark.parametrize(
    "width, height, scale, rows, cols",
    [
        (40, 30, 1.0, 2, 4),    # 40x15 after rescale
        (123, 77, 1.0, 4, 13),  # 123x39 (38.5 rounds up)
        (123, 77, 0.5, 2, 7),   # 62x19
        (64, 200, 0.3, 3, 2),   # 19x30
        (9, 9, 1.0, 1, 1),      # 9x5, one padded tile
    ],
)
def test_grid_dims_follow_rescale_and_tiling(knn_model, width, height, scale, rows, cols):
    grid = convert_image(GrayImage.blank(width, height), knn_model, scale)
    assert (grid.rows, grid.cols) == (rows, cols)


def test_strokes_produce_non_space_cells(aiss_model, line_image):
    text = grid_to_text(convert_image(line_image, aiss_model, aspect=False))
    assert text.strip() != ""
    assert text.splitlines()[0][0] == " "


def test_rendered_glyphs_convert_back(aiss_model):
    grid = AsciiGrid.from_lines(["A#", "/@"])
    img = grid_to_image(grid)
    back = convert_image(img, aiss_model, invert=False, aspect=False)
    assert grid_to_text(back) == "A#\n/@"


def test_threaded_conversion_matches_serial(aiss_model):
    img = draw_fixture("circle", 160)
    serial = convert_image(img, aiss_model)
    threaded = convert_image(img, aiss_model, threads=4)
    assert threaded.equals(serial)
    assert convert_with(img, aiss_model, ConvertOptions(threads=2)).equals(serial)


def test_dark_page_is_inverted_automatically(aiss_model, line_image):
    negative = GrayImage(255 - line_image.pixels)
    a = convert_image(line_image, aiss_model, aspect=False)
    b = convert_image(negative, aiss_model, aspect=False)
    assert a.equals(b)


def test_grid_to_image_geometry_and_colors():
    grid = AsciiGrid.from_lines(["  ", " |"])
    img = grid_to_image(grid, 8)
    assert (img.width, img.height) == (16, 16)
    assert img.pixels[:8].min() == 255
    assert img.pixels[8:, 8:].min() == 0


def test_invalid_grid_is_rejected(charset):
    bad = AsciiGrid(rows=1, cols=2, cells=[0, 99], charset=charset)
    with pytest.raises(DataError, match="invalid grid"):
        grid_to_text(bad)
    with pytest.raises(DataError, match="invalid grid"):
        grid_to_image(bad)


def test_crop_and_render_like(line_image):
    grid = AsciiGrid.from_lines(["-+-|"] * 3)
    rendered = render_like(grid, line_image)
    assert (rendered.width, rendered.height) == (40, 30)
    assert crop_to(rendered, 5, 7).pixels.shape == (5, 7)
    with pytest.raises(DataError, match="cannot crop"):
        crop_to(rendered, 31, 40)


def test_tone_baseline_levels():
    assert grid_to_text(tone_convert(GrayImage.blank(20, 20))) == "  "
    black = GrayImage(np.zeros((20, 20), dtype=np.uint8))
    assert set(grid_to_text(tone_convert(black))) == {TONE_RAMP[-1]}
    gray = GrayImage.blank(20, 20, value=128)
    assert set(grid_to_text(tone_convert(gray, aspect=False))) - {"\n"} == {"="}
    with pytest.raises(DataError):
        tone_convert(gray, ramp="")
