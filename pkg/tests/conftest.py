import shutil
import tempfile
from pathlib import Path

import pytest

from pyroomgp.geometry import LineSegment, Point2
from pyroomgp.logger import MapLogger
from pyroomgp.world_sim import grid_plan


@pytest.fixture
def temp_dir():
    tmp = tempfile.mkdtemp()
    yield Path(tmp)
    shutil.rmtree(tmp)


@pytest.fixture
def temp_log_file(temp_dir):
    return temp_dir / "test.log"


@pytest.fixture
def logger():
    return MapLogger(debug=True)


@pytest.fixture
def two_room_plan():
    return grid_plan(2, 1)


@pytest.fixture
def four_room_plan():
    return grid_plan(2, 2)


@pytest.fixture
def square_room():
    """The four inward-facing walls of a 4 m x 3 m room at the origin."""
    center = Point2(2.0, 1.5)
    corners = [Point2(0, 0), Point2(4, 0), Point2(4, 3), Point2(0, 3)]
    return [
        LineSegment.from_endpoints(a, b, center, id=i)
        for i, (a, b) in enumerate(zip(corners, corners[1:] + corners[:1]))
    ]
