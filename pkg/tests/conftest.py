from __future__ import annotations

import numpy as np
import pytest

from glyphcast.core import Charset, FeatureMode, GrayImage
from glyphcast.glyphset import AugmentParams, split, synthesize

# 4 samples per class keeps the session datasets to well under a second


@pytest.fixture(scope="session")
def charset() -> Charset:
    return Charset.default()


@pytest.fixture(scope="session")
def raw_set(charset):
    return synthesize(charset, 10, 4 * charset.size, seed=3, feature_mode=FeatureMode.RAW)


@pytest.fixture(scope="session")
def raw_split(raw_set):
    return split(raw_set, 0.25, seed=3)


@pytest.fixture(scope="session")
def clean_raw_set(charset):
    return synthesize(
        charset, 10, charset.size, seed=0, feature_mode=FeatureMode.RAW,
        params=AugmentParams.identity(),
    )


@pytest.fixture(scope="session")
def hog_set(charset):
    return synthesize(charset, 10, 2 * charset.size, seed=5, feature_mode=FeatureMode.HOG)


@pytest.fixture(scope="session")
def logpolar_set(charset):
    return synthesize(charset, 10, 2 * charset.size, seed=5, feature_mode=FeatureMode.LOGPOLAR)


@pytest.fixture
def line_image() -> GrayImage:
    """40x30 white page with a dark horizontal and a dark vertical line."""

    px = np.full((30, 40), 255, dtype=np.uint8)
    px[14:16, 2:38] = 0
    px[3:27, 20:22] = 0
    return GrayImage(px)
