import numpy as np

from models.mask_models import ShapeKind, ShapeSpec

# Equal share of each kind, sampled from these ranges.
desk_corpus_task = {
    ShapeKind.DISC: {"radius": (8.0, 30.0)},
    ShapeKind.RECTANGLE: {"width": (8.0, 60.0), "height": (8.0, 60.0), "rotation": (0.0, 90.0)},
    ShapeKind.REGULAR_POLYGON: {"radius": (12.0, 30.0), "sides": (3, 9), "rotation": (0.0, 360.0)},
    ShapeKind.STAR: {"radius": (16.0, 31.0), "points": (4, 10), "inner_ratio": (0.3, 0.7),
                     "rotation": (0.0, 360.0)},
    ShapeKind.NOISE: {"p": (0.2, 0.6)},
}

DESK_CORPUS_SIZE = 200
CENTER_JITTER = 2.0


def _draw(rng: np.random.Generator, bounds):
    lo, hi = bounds
    if isinstance(lo, int):
        return int(rng.integers(lo, hi))
    return float(rng.uniform(lo, hi))


def sample_desk_specs(count: int, rng: np.random.Generator):
    """Yield (shape_id, ShapeSpec) pairs cycling through the kinds in a fixed order"""
    kinds = list(desk_corpus_task)
    for index in range(count):
        kind = kinds[index % len(kinds)]
        params = {name: _draw(rng, bounds) for name, bounds in desk_corpus_task[kind].items()}
        if kind != ShapeKind.NOISE:
            params["center_x"] = 32.0 + float(rng.uniform(-CENTER_JITTER, CENTER_JITTER))
            params["center_y"] = 32.0 + float(rng.uniform(-CENTER_JITTER, CENTER_JITTER))
        yield f"{kind.value}_{index:04d}", ShapeSpec(kind=kind, **params)
