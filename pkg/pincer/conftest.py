from __future__ import absolute_import

import math
import os
import warnings

# Must be set before pincer.config is imported.
os.environ.setdefault('TESTING', 'true')

import numpy  # noqa: E402
import pytest  # noqa: E402

from pincer.cloud import merge_registered  # noqa: E402
from pincer.hand import HandParams  # noqa: E402
from pincer.log import (  # noqa: E402
    configure_raven,
    configure_stats,
)
from pincer.synth.camera import camera_pair  # noqa: E402
from pincer.synth.corpus import render_scene  # noqa: E402
from pincer.synth.scene import (  # noqa: E402
    Box,
    Scene,
)

# Hand frame with the approach pointing down, closing along world y.
TOP_DOWN = numpy.array([
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0],
])

# A close camera pair with a narrow field of view, dense enough for
# surface fits on a few centimeter sized objects.
SMALL_CAMERA = dict(
    distance=0.5,
    rays_h=100,
    rays_v=75,
    fov_h=math.radians(20.0),
    fov_v=math.radians(15.0),
)

BOX_SIZE = (0.05, 0.05, 0.08)


def small_cameras(target):
    return camera_pair(target, **SMALL_CAMERA)


def box_scene_factory():
    height = BOX_SIZE[2] / 2.0
    return Scene([Box(BOX_SIZE, position=(0.0, 0.0, height))], 0.0,
                 small_cameras((0.0, 0.0, height)))


@pytest.fixture(scope='session', autouse=True)
def package():
    # Enable all warnings in test mode.
    warnings.resetwarnings()
    warnings.simplefilter('default')

    yield None


@pytest.fixture(scope='session')
def raven_client():
    raven_client = configure_raven(transport='sync')
    yield raven_client


@pytest.fixture(scope='function')
def raven(raven_client):
    yield raven_client
    messages = [msg['message'] for msg in raven_client.msgs]
    raven_client._clear()
    assert not messages


@pytest.fixture(scope='session')
def stats_client():
    stats_client = configure_stats()
    yield stats_client
    stats_client.close()


@pytest.fixture(scope='function')
def stats(stats_client):
    yield stats_client
    stats_client._clear()


@pytest.fixture(scope='session')
def hand_params():
    yield HandParams()


@pytest.fixture(scope='function')
def rng():
    yield numpy.random.RandomState(42)


@pytest.fixture(scope='session')
def box_scene():
    yield box_scene_factory()


@pytest.fixture(scope='session')
def box_views(box_scene):
    yield render_scene(box_scene, seed=0)


@pytest.fixture(scope='session')
def box_cloud(box_views):
    """Both views of the box scene without the table."""
    merged = merge_registered(*box_views)
    keep = numpy.flatnonzero(merged.points[:, 2] > 0.002)
    yield merged.subset(keep)
