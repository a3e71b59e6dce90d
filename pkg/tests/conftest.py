import numpy as np
import pytest
from hypothesis import strategies as st

from hajlasz_lab.mmspace import MetricMeasureSpace, validate_space


def path3() -> MetricMeasureSpace:
    d = [[0, 0.5, 1], [0.5, 0, 0.5], [1, 0.5, 0]]
    return validate_space({"name": "path3", "dist": d, "weights": [1 / 3] * 3})


def two_point(weights=(1.0, 1.0)) -> MetricMeasureSpace:
    return validate_space({"name": "two", "dist": [[0, 1], [1, 0]], "weights": list(weights)})


@pytest.fixture
def path():
    return path3()


@pytest.fixture
def pair():
    return two_point()


@st.composite
def planar_spaces(draw, min_points=2, max_points=7):
    """Distinct points in the unit square with random positive weights."""
    n = draw(st.integers(min_points, max_points))
    coords = draw(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)),
                           min_size=n, max_size=n, unique=True))
    pts = np.array(coords, dtype=float) / 40
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    w = draw(st.lists(st.floats(0.05, 2.0), min_size=n, max_size=n))
    return validate_space({"name": "planar", "dist": d, "weights": w, "coords": pts})
