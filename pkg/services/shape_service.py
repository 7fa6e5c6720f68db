"""
Synthetic shape masks for tests and for the desk corpus.

Coordinates follow the pixel-center convention: pixel (row, col) is sampled at
(row + 0.5, col + 0.5), so a shape centered at (32, 32) is symmetric on the grid.
"""

from typing import Optional

import numpy as np
from skimage.draw import polygon2mask

from models.error_models import ParameterError
from models.mask_models import MASK_SIZE, Mask, ShapeKind, ShapeSpec

_CENTERS = np.arange(MASK_SIZE) + 0.5


def _check_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")


def _polygon(radii: np.ndarray, spec: ShapeSpec) -> np.ndarray:
    """Rasterize a closed polygon given by one radius per evenly spaced vertex"""
    n = radii.size
    theta = np.deg2rad(spec.rotation) + 2 * np.pi * np.arange(n) / n - np.pi / 2
    # polygon2mask samples at integer coordinates, hence the half-pixel shift
    rows = spec.center_y + radii * np.sin(theta) - 0.5
    cols = spec.center_x + radii * np.cos(theta) - 0.5
    return polygon2mask((MASK_SIZE, MASK_SIZE), np.column_stack([rows, cols]))


def render_disc(spec: ShapeSpec) -> np.ndarray:
    _check_positive("radius", spec.radius)
    dy = _CENTERS[:, None] - spec.center_y
    dx = _CENTERS[None, :] - spec.center_x
    return dx * dx + dy * dy <= spec.radius * spec.radius


def render_rectangle(spec: ShapeSpec) -> np.ndarray:
    _check_positive("width", spec.width)
    _check_positive("height", spec.height)
    theta = np.deg2rad(spec.rotation)
    dy = _CENTERS[:, None] - spec.center_y
    dx = _CENTERS[None, :] - spec.center_x
    # rotate sample points into the rectangle's frame
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    return (np.abs(u) <= spec.width / 2) & (np.abs(v) <= spec.height / 2)


def render_regular_polygon(spec: ShapeSpec) -> np.ndarray:
    _check_positive("radius", spec.radius)
    if spec.sides < 3:
        raise ParameterError(f"a regular polygon needs at least 3 sides, got {spec.sides}")
    return _polygon(np.full(spec.sides, spec.radius), spec)


def render_star(spec: ShapeSpec) -> np.ndarray:
    _check_positive("radius", spec.radius)
    if spec.points < 2:
        raise ParameterError(f"a star needs at least 2 points, got {spec.points}")
    if not 0 < spec.inner_ratio < 1:
        raise ParameterError(f"star inner_ratio must lie in (0, 1), got {spec.inner_ratio}")
    radii = np.empty(2 * spec.points)
    radii[0::2] = spec.radius
    radii[1::2] = spec.radius * spec.inner_ratio
    return _polygon(radii, spec)


def render_noise(spec: ShapeSpec, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= spec.p <= 1:
        raise ParameterError(f"noise probability must lie in [0, 1], got {spec.p}")
    return rng.random((MASK_SIZE, MASK_SIZE)) < spec.p


def generate_shape(spec: ShapeSpec, rng: Optional[np.random.Generator] = None, shape_id: str = "") -> Mask:
    """Render one synthetic mask; only noise consumes the generator"""
    if spec.kind == ShapeKind.DISC:
        pixels = render_disc(spec)
    elif spec.kind == ShapeKind.RECTANGLE:
        pixels = render_rectangle(spec)
    elif spec.kind == ShapeKind.REGULAR_POLYGON:
        pixels = render_regular_polygon(spec)
    elif spec.kind == ShapeKind.STAR:
        pixels = render_star(spec)
    else:
        if rng is None:
            raise ParameterError("noise shapes need a seeded generator")
        pixels = render_noise(spec, rng)
    return Mask(id=shape_id or spec.kind.value, pixels=pixels.astype(np.float64))


def boundary_edges(m: Mask) -> int:
    """Number of 4-neighbour pixel pairs whose values differ"""
    p = m.pixels
    return int((p[1:, :] != p[:-1, :]).sum() + (p[:, 1:] != p[:, :-1]).sum())
