"""Small synthetic line-art images used as the benchmark corpus."""

from __future__ import annotations

import math
from typing import Callable, Dict, List

import numpy as np
from PIL import Image, ImageDraw

from glyphcast.core import DataError, GrayImage

DEFAULT_FIXTURE_SIZE = 160
STROKE = 2

DrawFn = Callable[[ImageDraw.ImageDraw, int], None]


def _circle(draw: ImageDraw.ImageDraw, size: int) -> None:
    m = size // 8
    draw.ellipse((m, m, size - m, size - m), outline=0, width=STROKE)
    draw.ellipse((size // 3, size // 3, 2 * size // 3, 2 * size // 3), outline=0, width=STROKE)


def _house(draw: ImageDraw.ImageDraw, size: int) -> None:
    m = size // 8
    base = size // 2
    draw.rectangle((m, base, size - m, size - m), outline=0, width=STROKE)
    draw.line((m, base, size // 2, m, size - m, base), fill=0, width=STROKE)
    door = (size // 2 - m // 2, size - 3 * m, size // 2 + m // 2, size - m)
    draw.rectangle(door, outline=0, width=STROKE)


def _spiral(draw: ImageDraw.ImageDraw, size: int) -> None:
    c = size / 2.0
    turns = 3
    steps = 360
    pts = []
    for i in range(steps + 1):
        t = i / steps
        angle = 2 * math.pi * turns * t
        r = t * (size * 0.45)
        pts.append((c + r * math.cos(angle), c + r * math.sin(angle)))
    draw.line(pts, fill=0, width=STROKE)


def _waves(draw: ImageDraw.ImageDraw, size: int) -> None:
    for k in range(1, 4):
        y0 = k * size / 4.0
        amplitude = size / 16.0
        pts = [(x, y0 + amplitude * math.sin(4 * math.pi * x / size)) for x in range(size)]
        draw.line(pts, fill=0, width=STROKE)


FIXTURES: Dict[str, DrawFn] = {
    "circle": _circle,
    "house": _house,
    "spiral": _spiral,
    "waves": _waves,
}


def fixture_names() -> List[str]:
    return list(FIXTURES)


def draw_fixture(name: str, size: int = DEFAULT_FIXTURE_SIZE) -> GrayImage:
    """Dark strokes on a white square canvas of ``size`` pixels."""

    fn = FIXTURES.get(name)
    if fn is None:
        raise DataError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    if size < 16:
        raise DataError(f"fixture size must be >= 16, got {size}")
    canvas = Image.new("L", (size, size), 255)
    fn(ImageDraw.Draw(canvas), size)
    return GrayImage(np.asarray(canvas, dtype=np.uint8))


__all__ = ["DEFAULT_FIXTURE_SIZE", "FIXTURES", "draw_fixture", "fixture_names"]
