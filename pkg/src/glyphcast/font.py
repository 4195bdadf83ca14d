"""Embedded 8x16 bitmap font covering printable ASCII (codes 32..126).

The font is hand-drawn for this project and released into the public
domain together with the code. Glyphs are written in a row-indexed text
form so they can be reviewed and edited in place:

    @ <decimal code> <label>
    <row>[-<row>] <8 pixels, '#' = ink, '.' = paper>

Rows not listed are blank. Horizontal strokes are two rows thick so they
survive the 16 -> n vertical downsample; vertical strokes may be a single
column because the horizontal axis is upsampled at n = 10.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Dict

import numpy as np

from glyphcast.core import DataError

GLYPH_WIDTH = 8
GLYPH_HEIGHT = 16

_HEADER = re.compile(r"^@\s+(\d+)(?:\s.*)?$")
_ROW = re.compile(r"^(\d+)(?:-(\d+))?\s+([#.]+)$")

FONT_SOURCE = r"""
@ 32 space

@ 33 !
1-8 ...##...
11-12 ...##...

@ 34 "
1-4 .##..##.

@ 35 #
1-3 ..#..#..
4-5 .######.
6-7 ..#..#..
8-9 .######.
10-12 ..#..#..

@ 36 $
0-1 ...##...
2-3 .######.
4-5 ##.##...
6-7 .######.
8-9 ...##.##
10-11 .######.
12-13 ...##...

@ 37 %
1-2 ##....##
3-4 ##...##.
5-6 ....##..
7-8 ...##...
9-10 .##...##
11-12 ##....##

@ 38 &
1-2 ..###...
3-4 .##.##..
5-6 ..###...
7-8 .##.##.#
9-10 ##...##.
11-12 .###.##.

@ 39 '
1-4 ...##...

@ 40 (
0-1 ....##..
2-3 ...##...
4-9 ..##....
10-11 ...##...
12-13 ....##..

@ 41 )
0-1 ..##....
2-3 ...##...
4-9 ....##..
10-11 ...##...
12-13 ..##....

@ 42 *
3-4 ##.##.##
5-6 ..####..
7-8 ##.##.##

@ 43 +
4-6 ...##...
7-8 .######.
9-11 ...##...

@ 44 ,
10-12 ...##...
13-14 ..##....

@ 45 -
7-8 .######.

@ 46 .
11-12 ...##...

@ 47 /
1-2 ......##
3-4 .....##.
5-6 ....##..
7-8 ...##...
9-10 ..##....
11-12 .##.....

@ 48 0
1-2 .######.
3-4 ##....##
5-8 ##.##.##
9-10 ##....##
11-12 .######.

@ 49 1
1-2 ...##...
3-4 .####...
5-10 ...##...
11-12 .######.

@ 50 2
1-2 .######.
3-4 ##....##
5-6 .....##.
7-8 ...##...
9-10 .##.....
11-12 ########

@ 51 3
1-2 .######.
3-5 ......##
6-7 ..#####.
8-10 ......##
11-12 .######.

@ 52 4
1-2 ....###.
3-4 ...####.
5-6 ..##.##.
7-8 .##..##.
9-10 ########
11-12 .....##.

@ 53 5
1-2 ########
3-4 ##......
5-6 #######.
7-10 ......##
11-12 #######.

@ 54 6
1-2 ..#####.
3-4 .##.....
5-6 #######.
7-10 ##....##
11-12 .######.

@ 55 7
1-2 ########
3-4 ......##
5-6 .....##.
7-8 ....##..
9-12 ...##...

@ 56 8
1-2 .######.
3-5 ##....##
6-7 .######.
8-10 ##....##
11-12 .######.

@ 57 9
1-2 .######.
3-6 ##....##
7-8 .#######
9-10 ......##
11-12 .#####..

@ 58 :
4-5 ...##...
10-11 ...##...

@ 59 ;
4-5 ...##...
10-12 ...##...
13-14 ..##....

@ 60 <
3-4 .....##.
5-6 ...##...
7-8 .##.....
9-10 ...##...
11-12 .....##.

@ 61 =
5-6 .######.
9-10 .######.

@ 62 >
3-4 .##.....
5-6 ...##...
7-8 .....##.
9-10 ...##...
11-12 .##.....

@ 63 ?
1-2 .######.
3-4 ##....##
5-6 ....##..
7-8 ...##...
11-12 ...##...

@ 64 @
1-2 .######.
3-4 ##....##
5-6 ##.#####
7-8 ##.##.##
9-10 ##.#####
11-12 ##......
13-14 .######.

@ 65 A
1-2 ...##...
3-4 ..####..
5-6 .##..##.
7-8 ##....##
9-10 ########
11-12 ##....##

@ 66 B
1-2 #######.
3-5 ##....##
6-7 #######.
8-10 ##....##
11-12 #######.

@ 67 C
1-2 .######.
3-4 ##....##
5-8 ##......
9-10 ##....##
11-12 .######.

@ 68 D
1-2 ######..
3-4 ##...##.
5-8 ##....##
9-10 ##...##.
11-12 ######..

@ 69 E
1-2 ########
3-5 ##......
6-7 ######..
8-10 ##......
11-12 ########

@ 70 F
1-2 ########
3-5 ##......
6-7 ######..
8-12 ##......

@ 71 G
1-2 .######.
3-4 ##....##
5-6 ##......
7-8 ##..####
9-10 ##....##
11-12 .######.

@ 72 H
1-5 ##....##
6-7 ########
8-12 ##....##

@ 73 I
1-2 .######.
3-10 ...##...
11-12 .######.

@ 74 J
1-2 ..######
3-8 .....##.
9-10 ##...##.
11-12 .#####..

@ 75 K
1-2 ##....##
3-4 ##...##.
5-6 ##.##...
7-8 ####....
9-10 ##.##...
11-12 ##...##.

@ 76 L
1-10 ##......
11-12 ########

@ 77 M
1-2 ##....##
3-4 ###..###
5-6 ########
7-8 ##.##.##
9-12 ##....##

@ 78 N
1-2 ##....##
3-4 ###...##
5-6 ####..##
7-8 ##.##.##
9-10 ##..####
11-12 ##...###

@ 79 O
1-2 .######.
3-10 ##....##
11-12 .######.

@ 80 P
1-2 #######.
3-5 ##....##
6-7 #######.
8-12 ##......

@ 81 Q
1-2 .######.
3-8 ##....##
9-10 ##..####
11-12 .######.
13-14 .....###

@ 82 R
1-2 #######.
3-5 ##....##
6-7 #######.
8-9 ##..##..
10-12 ##...##.

@ 83 S
1-2 .#######
3-5 ##......
6-7 .######.
8-10 ......##
11-12 #######.

@ 84 T
1-2 ########
3-12 ...##...

@ 85 U
1-10 ##....##
11-12 .######.

@ 86 V
1-6 ##....##
7-8 .##..##.
9-10 ..####..
11-12 ...##...

@ 87 W
1-6 ##....##
7-8 ##.##.##
9-10 ########
11-12 .##..##.

@ 88 X
1-2 ##....##
3-4 .##..##.
5-8 ..####..
9-10 .##..##.
11-12 ##....##

@ 89 Y
1-2 ##....##
3-4 .##..##.
5-6 ..####..
7-12 ...##...

@ 90 Z
1-2 ########
3-4 .....##.
5-6 ....##..
7-8 ...##...
9-10 ..##....
11-12 ########

@ 91 [
0-1 ..####..
2-11 ..##....
12-13 ..####..

@ 92 backslash
1-2 ##......
3-4 .##.....
5-6 ..##....
7-8 ...##...
9-10 ....##..
11-12 .....##.

@ 93 ]
0-1 ..####..
2-11 ....##..
12-13 ..####..

@ 94 ^
1-2 ...##...
3-4 ..####..
5-6 .##..##.

@ 95 _
14-15 ########

@ 96 `
1-2 ..##....
3-4 ...##...

@ 97 a
5-6 .######.
7 ......##
8-9 .#######
10 ##....##
11-12 .#######

@ 98 b
1-4 ##......
5-6 #######.
7-10 ##....##
11-12 #######.

@ 99 c
5-6 .######.
7-10 ##......
11-12 .######.

@ 100 d
1-4 ......##
5-6 .#######
7-10 ##....##
11-12 .#######

@ 101 e
5-6 .######.
7 ##....##
8-9 ########
10 ##......
11-12 .######.

@ 102 f
1-2 ...####.
3-4 ..##....
5-6 ######..
7-12 ..##....

@ 103 g
5-6 .#######
7-10 ##....##
11-12 .#######
13 ......##
14-15 .######.

@ 104 h
1-4 ##......
5-6 #######.
7-12 ##....##

@ 105 i
1-2 ...##...
5-6 .###....
7-10 ...##...
11-12 .######.

@ 106 j
1-2 .....##.
5-6 ...####.
7-13 .....##.
14-15 .####...

@ 107 k
1-4 ##......
5-6 ##..##..
7-8 ##.##...
9-10 #####...
11-12 ##..##..

@ 108 l
1-2 .###....
3-10 ...##...
11-12 ...####.

@ 109 m
5-6 #######.
7-12 ##.##.##

@ 110 n
5-6 #######.
7-12 ##....##

@ 111 o
5-6 .######.
7-10 ##....##
11-12 .######.

@ 112 p
5-6 #######.
7-10 ##....##
11-12 #######.
13-15 ##......

@ 113 q
5-6 .#######
7-10 ##....##
11-12 .#######
13-15 ......##

@ 114 r
5-6 ##.####.
7-8 ###.....
9-12 ##......

@ 115 s
5-6 .######.
7 ##......
8-9 .######.
10 ......##
11-12 .######.

@ 116 t
1-4 ..##....
5-6 .######.
7-10 ..##....
11-12 ...####.

@ 117 u
5-10 ##....##
11-12 .#######

@ 118 v
5-7 ##....##
8-9 .##..##.
10 ..####..
11-12 ...##...

@ 119 w
5-8 ##....##
9-10 ##.##.##
11-12 .##..##.

@ 120 x
5-6 ##....##
7 .##..##.
8-9 ..####..
10 .##..##.
11-12 ##....##

@ 121 y
5-8 ##....##
9-10 .##..##.
11-12 ..####..
13 ..##....
14-15 ###.....

@ 122 z
5-6 ########
7-8 ....##..
9-10 ..##....
11-12 ########

@ 123 {
0-1 ....###.
2-5 ...##...
6-7 .##.....
8-11 ...##...
12-13 ....###.

@ 124 |
1-14 ...##...

@ 125 }
0-1 .###....
2-5 ...##...
6-7 .....##.
8-11 ...##...
12-13 .###....

@ 126 ~
6-7 .###..##
8-9 ##..###.
"""


def parse_font(source: str) -> Dict[int, np.ndarray]:
    """Parse the row-indexed font text into ``{code: (16, 8) uint8}`` bitmaps."""

    glyphs: Dict[int, np.ndarray] = {}
    current: int | None = None
    seen_rows: set[int] = set()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        header = _HEADER.match(line)
        if header:
            current = int(header.group(1))
            if current in glyphs:
                raise DataError(f"font line {lineno}: duplicate glyph {current}")
            glyphs[current] = np.zeros((GLYPH_HEIGHT, GLYPH_WIDTH), dtype=np.uint8)
            seen_rows = set()
            continue
        row = _ROW.match(line)
        if row is None or current is None:
            raise DataError(f"font line {lineno}: cannot parse {line!r}")
        first = int(row.group(1))
        last = int(row.group(2) or first)
        pattern = row.group(3)
        if len(pattern) != GLYPH_WIDTH:
            raise DataError(
                f"font line {lineno}: expected {GLYPH_WIDTH} pixels, got {len(pattern)}"
            )
        if not 0 <= first <= last < GLYPH_HEIGHT:
            raise DataError(f"font line {lineno}: rows {first}-{last} outside the cell")
        rows = set(range(first, last + 1))
        if rows & seen_rows:
            raise DataError(f"font line {lineno}: glyph {current} redefines a row")
        seen_rows |= rows
        bits = np.frombuffer(pattern.encode("ascii"), dtype=np.uint8) == ord("#")
        glyphs[current][first : last + 1, :] = bits.astype(np.uint8)
    for bitmap in glyphs.values():
        bitmap.setflags(write=False)
    return glyphs


@lru_cache(maxsize=1)
def builtin_font() -> Dict[int, np.ndarray]:
    return parse_font(FONT_SOURCE)


def glyph_bitmap(code: int) -> np.ndarray:
    """Return the read-only 16x8 ink bitmap (1 = ink) for ``code``."""

    font = builtin_font()
    try:
        return font[int(code)]
    except KeyError:
        raise DataError(
            f"unknown character: code {code} has no glyph in the embedded font",
            error_type="unknown_character",
        ) from None
