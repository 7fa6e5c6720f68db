import numpy as np
import pytest

from models.mask_models import MASK_SIZE, Mask, ShapeKind, ShapeSpec
from services.shape_service import generate_shape


def make_mask(pixels, shape_id: str = "m") -> Mask:
    return Mask(id=shape_id, pixels=np.asarray(pixels, dtype=np.float64))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def disc() -> Mask:
    return generate_shape(ShapeSpec(kind=ShapeKind.DISC, radius=20), shape_id="disc")


@pytest.fixture
def star() -> Mask:
    return generate_shape(ShapeSpec(kind=ShapeKind.STAR, points=7, inner_ratio=0.4, radius=28), shape_id="star")


@pytest.fixture
def noise() -> Mask:
    return generate_shape(ShapeSpec(kind=ShapeKind.NOISE, p=0.5), np.random.default_rng(7), shape_id="noise")


@pytest.fixture
def all_white() -> Mask:
    return make_mask(np.ones((MASK_SIZE, MASK_SIZE)), "white")


@pytest.fixture
def all_black() -> Mask:
    return make_mask(np.zeros((MASK_SIZE, MASK_SIZE)), "black")
