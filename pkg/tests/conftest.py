import numpy as np
import pytest

from pcrefine import ClassSchema, PointCloudScene


@pytest.fixture
def schema():
    return ClassSchema(
        base_names=("floor", "wall", "table"),
        novel_names=("lamp", "plant", "monitor", "backpack", "shoe"),
    )


@pytest.fixture
def small_scene(schema):
    rng = np.random.default_rng(7)
    n = 50
    return PointCloudScene(
        positions=rng.uniform(0, 5, size=(n, 3)),
        labels=rng.integers(-1, schema.n_classes, size=n),
        colors=rng.uniform(0, 1, size=(n, 3)),
    )


def random_labels(rng, n, n_classes, include_background=True):
    low = -1 if include_background else 0
    return rng.integers(low, n_classes, size=n).astype(np.int64)
