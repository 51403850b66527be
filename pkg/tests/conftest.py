import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from particle_prep.builtin import box, circle, sphere
from particle_prep.levelset import build_field


@pytest.fixture(scope="session")
def circle_geom():
    return circle(radius=1.0, segments=1024)


@pytest.fixture(scope="session")
def sphere_geom():
    return sphere(radius=1.0, subdivisions=3)


@pytest.fixture(scope="session")
def cube_geom():
    return box(size=(1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def circle_field(circle_geom):
    return build_field(circle_geom, [[-2.0, -2.0], [2.0, 2.0]], 0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)


@pytest.fixture()
def square_csv(tmp_path):
    p = tmp_path / "square.csv"
    p.write_text("0,0\n1,0\n1,1\n0,1\n")
    return p
