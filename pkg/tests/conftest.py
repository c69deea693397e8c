import pathlib

import numpy as np
import pytest
from hypothesis import strategies as st

from camcond.camera import Extrinsics, Intrinsics

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


unit_interval = st.floats(min_value=-1.0, max_value=1.0,
                          allow_nan=False, allow_infinity=False)


@st.composite
def rotations(draw) -> np.ndarray:
    """Rotation matrices from quaternions with a not-tiny norm."""
    q = np.array(draw(st.tuples(unit_interval, unit_interval,
                                unit_interval, unit_interval)
                      .filter(lambda t: sum(v * v for v in t) > 1e-2)))
    return quat_to_matrix(q)


coordinate = st.floats(min_value=-10.0, max_value=10.0,
                       allow_nan=False, allow_infinity=False)


@st.composite
def vectors3(draw) -> np.ndarray:
    return np.array(draw(st.tuples(coordinate, coordinate, coordinate)))


@st.composite
def extrinsics_st(draw) -> Extrinsics:
    return Extrinsics(r=draw(rotations()), t=draw(vectors3()))


@st.composite
def intrinsics_st(draw) -> Intrinsics:
    width = draw(st.integers(min_value=2, max_value=128))
    height = draw(st.integers(min_value=2, max_value=128))
    fx = draw(st.floats(min_value=0.5, max_value=500.0))
    fy = draw(st.floats(min_value=0.5, max_value=500.0))
    cx = draw(st.floats(min_value=0.0, max_value=float(width)))
    cy = draw(st.floats(min_value=0.0, max_value=float(height)))
    return Intrinsics.from_params(fx=fx, fy=fy, cx=cx, cy=cy,
                                  width=width, height=height)
