"""Context handed to every backend's ``fit``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from glyphcast.core import Charset, EmitFn, FeatureMode, noop_emit


@dataclass(frozen=True)
class TrainContext:
    charset: Charset
    tile_size: int
    feature_mode: FeatureMode
    seed: int = 0
    threads: Optional[int] = None
    emit: EmitFn = noop_emit

    @property
    def classes(self) -> int:
        return self.charset.size
